#pragma once

// Independent reference evaluators. Everything here is written from the model
// definitions directly, in long double, without calling into the library's
// numerical code.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "bdwd/types.hpp"

namespace oracle {

using real = long double;

inline real V(real u) { return u <= 0.5L ? 1.0L - u : 1.0L / (4.0L * u); }

inline real link(real u, real P1) {
  const real a = P1 * std::exp(-V(u));
  const real b = (1.0L - P1) * std::exp(-V(-u));
  return a / (a + b);
}

inline real prior_term(real u) { return std::exp(-V(u)) + std::exp(-V(-u)); }

inline real score(const bdwd::Dataset& data, Eigen::Index i, const std::vector<real>& beta,
                  real beta0) {
  real u = beta0;
  for (Eigen::Index j = 0; j < data.dim(); ++j)
    u += static_cast<real>(data.X(j, i)) * beta[static_cast<std::size_t>(j)];
  return u;
}

inline std::vector<real> widen(const bdwd::Vector& v) {
  std::vector<real> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index j = 0; j < v.size(); ++j) out[static_cast<std::size_t>(j)] = v[j];
  return out;
}

inline real sq_norm(const std::vector<real>& b) {
  real s = 0;
  for (real x : b) s += x * x;
  return s;
}

/// (1/n) sum V(y u) + (lambda / 2) ||beta||^2.
inline real objective(const bdwd::Dataset& data, const std::vector<real>& beta, real beta0,
                      real lambda) {
  real s = 0;
  for (Eigen::Index i = 0; i < data.size(); ++i)
    s += V(bdwd::sign_of(data.y[static_cast<std::size_t>(i)]) * score(data, i, beta, beta0));
  return s / static_cast<real>(data.size()) + 0.5L * lambda * sq_norm(beta);
}

/// Labeled: -V(y u); unlabeled: log(P1 e^{-V(u)} + (1 - P1) e^{-V(-u)}); minus lambda n / 2 ||beta||^2.
inline real log_posterior(const bdwd::Dataset& data, const std::vector<real>& beta, real beta0,
                          real lambda) {
  real s = 0;
  const real P1 = data.P1;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const real u = score(data, i, beta, beta0);
    const auto y = data.y[static_cast<std::size_t>(i)];
    if (y == bdwd::Label::unlabeled)
      s += std::log(P1 * std::exp(-V(u)) + (1.0L - P1) * std::exp(-V(-u)));
    else
      s -= V(bdwd::sign_of(y) * u);
  }
  return s - 0.5L * lambda * static_cast<real>(data.size()) * sq_norm(beta);
}

inline real log_prior_beta(const bdwd::Dataset& data, const std::vector<real>& beta, real beta0,
                           real lambda) {
  bdwd::Dataset copy = data;
  std::fill(copy.y.begin(), copy.y.end(), bdwd::Label::unlabeled);
  return log_posterior(copy, beta, beta0, lambda);
}

/// Central-difference Hessian of f at x with step h.
inline std::vector<std::vector<real>> fd_hessian(const std::function<real(const std::vector<real>&)>& f,
                                                 std::vector<real> x, real h) {
  const std::size_t d = x.size();
  std::vector<std::vector<real>> H(d, std::vector<real>(d));
  const real f0 = f(x);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      real v;
      if (a == b) {
        const real xa = x[a];
        x[a] = xa + h;
        const real fp = f(x);
        x[a] = xa - h;
        const real fm = f(x);
        x[a] = xa;
        v = (fp - 2 * f0 + fm) / (h * h);
      } else {
        const real xa = x[a], xb = x[b];
        auto at = [&](real da, real db) {
          x[a] = xa + da;
          x[b] = xb + db;
          const real r = f(x);
          x[a] = xa;
          x[b] = xb;
          return r;
        };
        v = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4 * h * h);
      }
      H[a][b] = H[b][a] = v;
    }
  }
  return H;
}

/// Minimum of f over a cube grid followed by a compass search refinement.
inline real grid_then_pattern_min(const std::function<real(const std::vector<real>&)>& f,
                                  std::size_t dim, real lo, real hi, real step,
                                  std::vector<real>* argmin = nullptr) {
  const auto points = static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
  std::vector<std::size_t> idx(dim, 0);
  std::vector<real> x(dim), best_x(dim);
  real best = std::numeric_limits<real>::infinity();
  for (;;) {
    for (std::size_t k = 0; k < dim; ++k) x[k] = lo + step * static_cast<real>(idx[k]);
    const real v = f(x);
    if (v < best) {
      best = v;
      best_x = x;
    }
    std::size_t k = 0;
    while (k < dim && ++idx[k] == points) idx[k++] = 0;
    if (k == dim) break;
  }
  real s = step;
  x = best_x;
  while (s > 1e-13L) {
    bool improved = false;
    for (std::size_t k = 0; k < dim && !improved; ++k)
      for (real sign : {1.0L, -1.0L}) {
        std::vector<real> y = x;
        y[k] += sign * s;
        const real v = f(y);
        if (v < best) {
          best = v;
          x = y;
          improved = true;
          break;
        }
      }
    if (!improved) s *= 0.5L;
  }
  if (argmin) *argmin = x;
  return best;
}

/// Composite Gauss-Legendre rule over equal panels.
inline double integrate(const std::function<double(double)>& f, double a, double b, double panel) {
  const int panels = std::max(1, static_cast<int>(std::ceil((b - a) / panel)));
  const double w = (b - a) / panels;
  double s = 0.0;
  for (int k = 0; k < panels; ++k)
    s += boost::math::quadrature::gauss<double, 20>::integrate(f, a + k * w, a + (k + 1) * w);
  return s;
}

/// Random dataset with features N(shift * y, 1) and both classes present.
inline bdwd::Dataset random_dataset(std::mt19937_64& rng, int d, int n, double shift = 0.5,
                                    int unlabeled = 0) {
  std::normal_distribution<double> z(0.0, 1.0);
  bdwd::Dataset data;
  data.X.resize(d, n);
  data.y.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const bool pos = i % 2 == 0;
    for (int j = 0; j < d; ++j) data.X(j, i) = z(rng) + (pos ? shift : -shift);
    data.y[static_cast<std::size_t>(i)] = pos ? bdwd::Label::positive : bdwd::Label::negative;
  }
  for (int i = n - unlabeled; i < n; ++i) data.y[static_cast<std::size_t>(i)] = bdwd::Label::unlabeled;
  return data;
}

}  // namespace oracle
