#include "bdwd/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "bdwd/dwd.hpp"
#include "bdwd/error.hpp"

namespace bdwd {

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  const double hi = std::max(a, b);
  if (hi == neg_inf) return neg_inf;
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

void check_dims(const ModelState& state, const Dataset& data) {
  data.validate();
  if (state.beta.size() != data.dim())
    throw InvalidArgument("coefficient length " + std::to_string(state.beta.size()) +
                          " does not match feature dimension " + std::to_string(data.dim()));
  if (!state.finite()) throw InvalidArgument("model state contains non-finite values");
}

double penalty(const ModelState& state, const Dataset& data) {
  return 0.5 * state.lambda * static_cast<double>(data.size()) * state.beta.squaredNorm();
}

}  // namespace

void LambdaPrior::validate() const {
  if (!(lower > 0.0 && upper > lower && std::isfinite(upper)))
    throw InvalidArgument("lambda prior requires 0 < lower < upper");
}

double LambdaPrior::log_density(double lambda) const {
  return contains(lambda) ? -std::log(upper - lower) : neg_inf;
}

double class_probability(double u, double P1) {
  if (!(P1 > 0.0 && P1 < 1.0)) throw InvalidArgument("P1 must lie strictly inside (0,1)");
  const double log_odds = std::log(P1) - std::log1p(-P1) - dwd_loss(u) + dwd_loss(-u);
  return 1.0 / (1.0 + std::exp(-log_odds));
}

double log_mixture_term(double u, double P1) {
  return log_add(std::log(P1) - dwd_loss(u), std::log1p(-P1) - dwd_loss(-u));
}

double prior_score_term(double u) {
  return std::exp(-dwd_loss(u)) + std::exp(-dwd_loss(-u));
}

double log_posterior(const ModelState& state, const Dataset& data) {
  check_dims(state, data);
  if (state.lambda < 0.0) throw InvalidArgument("lambda must be non-negative");
  const std::size_t labeled = data.count_labeled();
  if (labeled == 0)
    throw InvalidArgument("log_posterior needs at least one labeled sample; use log_prior_beta");
  if (labeled == data.y.size())
    return -static_cast<double>(data.size()) * objective(state, data);

  const Scores s = scores(state, data);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const Label y = data.y[static_cast<std::size_t>(i)];
    acc += is_labeled(y) ? -dwd_loss(s.signed_u[i]) : log_mixture_term(s.u[i], data.P1);
  }
  return acc - penalty(state, data);
}

double log_prior_beta(const ModelState& state, const Dataset& data) {
  check_dims(state, data);
  if (!(state.lambda > 0.0)) throw InvalidArgument("log_prior_beta requires lambda > 0");
  const Vector u = scores(state, data.X);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) acc += log_mixture_term(u[i], data.P1);
  return acc - penalty(state, data);
}

void PhiTable::validate() const {
  if (lambda_grid.size() < 2 || log_phi.size() != lambda_grid.size())
    throw InvalidArgument("phi table needs at least two grid points with matching values");
  if (!(lambda_grid.front() > 0.0)) throw InvalidArgument("phi table grid must be positive");
  const double step = std::log(lambda_grid[1]) - std::log(lambda_grid[0]);
  for (std::size_t j = 1; j < lambda_grid.size(); ++j) {
    if (!(lambda_grid[j] > lambda_grid[j - 1]))
      throw InvalidArgument("phi table grid must be strictly increasing");
    const double s = std::log(lambda_grid[j]) - std::log(lambda_grid[j - 1]);
    if (std::abs(s - step) > 1e-9 * std::max(1.0, std::abs(step)))
      throw InvalidArgument("phi table grid must be equally spaced in log lambda");
  }
  for (double v : log_phi)
    if (!std::isfinite(v)) throw InvalidArgument("phi table holds a non-finite log value");
}

PhiPointEstimate estimate_phi_point(const Dataset& data, double lambda, double beta0,
                                    std::int64_t mc_samples, Rng& rng) {
  if (!(lambda > 0.0)) throw InvalidArgument("phi estimation requires lambda > 0");
  if (mc_samples < 1) throw InvalidArgument("phi estimation requires at least one draw");
  const double n = static_cast<double>(data.size());
  const double d = static_cast<double>(data.dim());
  const double sd = 1.0 / std::sqrt(lambda * n);

  std::vector<double> log_a(static_cast<std::size_t>(mc_samples));
  Vector beta(data.dim());
  for (auto& la : log_a) {
    for (Eigen::Index j = 0; j < beta.size(); ++j) beta[j] = sd * std_normal(rng);
    const Vector u = (data.X.transpose() * beta).array() + beta0;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) acc += log_mixture_term(u[i], data.P1);
    la = acc;
  }

  // Log-sum-exp mean of A-term values and the relative standard error of that mean.
  const double hi = *std::max_element(log_a.begin(), log_a.end());
  double sum = 0.0, sum_sq = 0.0;
  for (double la : log_a) {
    const double w = std::exp(la - hi);
    sum += w;
    sum_sq += w * w;
  }
  const double T = static_cast<double>(mc_samples);
  const double mean = sum / T;
  const double var = mc_samples > 1 ? std::max(0.0, (sum_sq - T * mean * mean) / (T - 1.0)) : 0.0;

  PhiPointEstimate out;
  out.log_phi = 0.5 * d * std::log(2.0 * std::numbers::pi / (n * lambda)) + hi + std::log(mean);
  out.relative_se = std::sqrt(var / T) / mean;
  return out;
}

PhiTable estimate_phi_table(const Dataset& data, const LambdaPrior& prior, double beta0,
                            std::uint64_t seed, const PhiOptions& options) {
  data.validate();
  prior.validate();
  if (options.grid_points < 2) throw InvalidArgument("phi table needs J >= 2 grid points");
  if (options.mc_samples < 1) throw InvalidArgument("phi table needs T >= 1 draws per point");
  if (!std::isfinite(beta0)) throw InvalidArgument("beta0 must be finite");
  const double work = static_cast<double>(options.grid_points) *
                      static_cast<double>(options.mc_samples) *
                      static_cast<double>(data.size()) * static_cast<double>(data.dim());
  if (work > options.max_work)
    throw ResourceError("phi table estimation needs " + std::to_string(work) +
                        " operations, above the configured budget of " +
                        std::to_string(options.max_work));

  PhiTable table;
  table.mc_samples = options.mc_samples;
  table.seed = seed;
  table.beta0_ref = beta0;
  table.P1 = data.P1;
  const auto J = static_cast<std::size_t>(options.grid_points);
  const double lo = std::log(prior.lower);
  const double step = (std::log(prior.upper) - lo) / static_cast<double>(J - 1);
  table.lambda_grid.resize(J);
  table.log_phi.resize(J);
  for (std::size_t j = 0; j < J; ++j)
    table.lambda_grid[j] = std::exp(lo + static_cast<double>(j) * step);
  table.lambda_grid.front() = prior.lower;
  table.lambda_grid.back() = prior.upper;

  for (std::size_t j = 0; j < J; ++j) {
    Rng rng = make_rng(seed, {j});
    table.log_phi[j] =
        estimate_phi_point(data, table.lambda_grid[j], beta0, options.mc_samples, rng).log_phi;
  }
  return table;
}

double log_phi_interp(const PhiTable& table, double lambda) {
  if (table.lambda_grid.size() < 2) throw InvalidArgument("phi table is empty");
  if (!(lambda >= table.min_lambda() && lambda <= table.max_lambda()))
    throw RangeError("lambda " + std::to_string(lambda) + " outside phi table range [" +
                     std::to_string(table.min_lambda()) + ", " +
                     std::to_string(table.max_lambda()) + "]");
  const auto& grid = table.lambda_grid;
  const auto it = std::lower_bound(grid.begin(), grid.end(), lambda);
  const auto k = static_cast<std::size_t>(it - grid.begin());
  if (grid[k] == lambda) return table.log_phi[k];
  const double a = std::log(grid[k - 1]);
  const double b = std::log(grid[k]);
  const double t = (std::log(lambda) - a) / (b - a);
  return (1.0 - t) * table.log_phi[k - 1] + t * table.log_phi[k];
}

double log_lambda_conditional(const ModelState& state, const Dataset& data,
                              const LambdaPrior& prior, const PhiTable& table) {
  check_dims(state, data);
  if (!prior.contains(state.lambda)) return neg_inf;
  if (!(state.lambda >= table.min_lambda() && state.lambda <= table.max_lambda())) return neg_inf;
  const Vector u = scores(state, data.X);
  double a_term = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) a_term += log_mixture_term(u[i], data.P1);
  return prior.log_density(state.lambda) + a_term - log_phi_interp(table, state.lambda) -
         penalty(state, data);
}

}  // namespace bdwd
