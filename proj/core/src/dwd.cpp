#include "bdwd/dwd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace bdwd {

namespace {

void require_finite(double u) {
  if (!std::isfinite(u)) throw InvalidArgument("DWD loss evaluated at a non-finite score");
}

void check_state(const ModelState& state, const Dataset& data) {
  if (state.beta.size() != data.dim())
    throw InvalidArgument("coefficient length " + std::to_string(state.beta.size()) +
                          " does not match feature dimension " + std::to_string(data.dim()));
  if (!state.finite()) throw InvalidArgument("model state contains non-finite values");
}

void check_objective_inputs(const ModelState& state, const Dataset& data) {
  data.validate();
  if (!data.fully_labeled())
    throw InvalidArgument("objective requires fully labeled data");
  check_state(state, data);
}

// Solver workspace: theta = (beta0, beta), signed design rows y_i * (1, x_i).
class Problem {
 public:
  Problem(const Dataset& data, double lambda)
      : X_(data.X), lambda_(lambda), n_(static_cast<double>(data.size())) {
    y_.resize(data.size());
    for (Eigen::Index i = 0; i < data.size(); ++i) y_[i] = sign_of(data.y[static_cast<std::size_t>(i)]);
  }

  Eigen::Index dim() const { return X_.rows() + 1; }

  Vector signed_scores(const Vector& theta) const {
    Vector s = (X_.transpose() * theta.tail(X_.rows())).array() + theta[0];
    return s.cwiseProduct(y_);
  }

  double value(const Vector& theta, const Vector& s) const {
    double loss = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) loss += dwd_loss(s[i]);
    return loss / n_ + 0.5 * lambda_ * theta.tail(X_.rows()).squaredNorm();
  }

  Vector gradient(const Vector& theta, const Vector& s) const {
    Vector w(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) w[i] = dwd_loss_grad(s[i]) * y_[i] / n_;
    Vector g(dim());
    g[0] = w.sum();
    g.tail(X_.rows()) = X_ * w + lambda_ * theta.tail(X_.rows());
    return g;
  }

  Matrix hessian(const Vector& s) const {
    const Eigen::Index d = X_.rows();
    // Rows of A are sqrt(V''(s_i)/n) * (1, x_i) over the curved branch.
    Eigen::Index active = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) active += s[i] > 0.5 ? 1 : 0;
    Matrix A(d + 1, active);
    for (Eigen::Index i = 0, k = 0; i < s.size(); ++i) {
      if (!(s[i] > 0.5)) continue;
      const double w = std::sqrt(dwd_loss_curvature(s[i]) / n_);
      A(0, k) = w;
      A.col(k).tail(d) = w * X_.col(i);
      ++k;
    }
    Matrix H = A * A.transpose();
    H.bottomRightCorner(d, d).diagonal().array() += lambda_;
    return H;
  }

 private:
  const Matrix& X_;
  Vector y_;
  double lambda_;
  double n_;
};

ModelState to_state(const Vector& theta, double lambda) {
  return ModelState{theta.tail(theta.size() - 1), theta[0], lambda};
}

}  // namespace

double dwd_loss(double u) {
  require_finite(u);
  return u <= 0.5 ? 1.0 - u : 1.0 / (4.0 * u);
}

double dwd_loss_grad(double u) {
  require_finite(u);
  return u <= 0.5 ? -1.0 : -1.0 / (4.0 * u * u);
}

double dwd_loss_curvature(double u) {
  require_finite(u);
  return u <= 0.5 ? 0.0 : 1.0 / (2.0 * u * u * u);
}

Vector scores(const ModelState& state, const Matrix& X) {
  if (state.beta.size() != X.rows())
    throw InvalidArgument("coefficient length " + std::to_string(state.beta.size()) +
                          " does not match feature dimension " + std::to_string(X.rows()));
  Vector u(X.cols());
  for (Eigen::Index i = 0; i < X.cols(); ++i) {
    double acc = state.beta0;
    for (Eigen::Index j = 0; j < X.rows(); ++j) acc += X(j, i) * state.beta[j];
    u[i] = acc;
  }
  return u;
}

Scores scores(const ModelState& state, const Dataset& data) {
  if (static_cast<Eigen::Index>(data.y.size()) != data.size())
    throw InvalidArgument("label vector length does not match sample count");
  Scores out;
  out.u = scores(state, data.X);
  out.signed_u.resize(out.u.size());
  for (Eigen::Index i = 0; i < out.u.size(); ++i)
    out.signed_u[i] = sign_of(data.y[static_cast<std::size_t>(i)]) * out.u[i];
  return out;
}

double objective(const ModelState& state, const Dataset& data) {
  check_objective_inputs(state, data);
  const Scores s = scores(state, data);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < s.signed_u.size(); ++i) loss += dwd_loss(s.signed_u[i]);
  return loss / static_cast<double>(data.size()) + 0.5 * state.lambda * state.beta.squaredNorm();
}

ObjectiveGradient objective_grad(const ModelState& state, const Dataset& data) {
  check_objective_inputs(state, data);
  const Scores s = scores(state, data);
  const double inv_n = 1.0 / static_cast<double>(data.size());
  ObjectiveGradient g;
  g.beta = state.lambda * state.beta;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const double w = dwd_loss_grad(s.signed_u[i]) * sign_of(data.y[static_cast<std::size_t>(i)]) * inv_n;
    g.beta0 += w;
    g.beta.noalias() += w * data.X.col(i);
  }
  return g;
}

ModelState solve_mode(const Dataset& data, double lambda, const SolverOptions& options) {
  data.validate_supervised();
  if (!std::isfinite(lambda) || lambda < 0.0)
    throw InvalidArgument("penalty lambda must be finite and non-negative");
  if (options.tol <= 0.0 || options.max_iter < 1)
    throw InvalidArgument("solver tolerance must be positive and max_iter >= 1");
  if (lambda == 0.0) {
    if (data.dim() >= data.size())
      throw InvalidArgument("lambda = 0 requires d < n");
    Matrix design(data.size(), data.dim() + 1);
    design.col(0).setOnes();
    design.rightCols(data.dim()) = data.X.transpose();
    if (Eigen::ColPivHouseholderQR<Matrix>(design).rank() < data.dim() + 1)
      throw InvalidArgument("lambda = 0 requires a full-rank design");
  }

  const Problem problem(data, lambda);
  const Eigen::Index p = problem.dim();
  const bool pinned = options.fixed_beta0.has_value();
  if (pinned && !std::isfinite(*options.fixed_beta0))
    throw InvalidArgument("fixed beta0 must be finite");
  Vector theta = Vector::Zero(p);
  if (pinned) theta[0] = *options.fixed_beta0;
  auto gradient = [&](const Vector& t, const Vector& sc) {
    Vector out = problem.gradient(t, sc);
    if (pinned) out[0] = 0.0;
    return out;
  };
  Vector s = problem.signed_scores(theta);
  double f = problem.value(theta, s);
  Vector g = gradient(theta, s);

  constexpr double armijo = 1e-4;
  constexpr int max_halvings = 60;
  const double eps = std::numeric_limits<double>::epsilon();

  // Backtracking along `dir`; on success updates theta, s, f, g and returns true.
  auto line_search = [&](const Vector& dir, double step) {
    const double slope = g.dot(dir);
    if (!(slope < 0.0)) return false;
    const double gnorm = g.norm();
    for (int k = 0; k < max_halvings; ++k, step *= 0.5) {
      Vector trial = theta + step * dir;
      Vector s_trial = problem.signed_scores(trial);
      const double f_trial = problem.value(trial, s_trial);
      if (!std::isfinite(f_trial)) continue;
      const bool sufficient = f_trial <= f + armijo * step * slope;
      bool accept = sufficient;
      Vector g_trial;
      if (!sufficient && f_trial <= f + 8.0 * eps * std::max(1.0, std::abs(f))) {
        // Within rounding of f: accept only if the gradient shrinks.
        g_trial = gradient(trial, s_trial);
        accept = g_trial.norm() < gnorm;
      }
      if (accept) {
        if (g_trial.size() == 0) g_trial = gradient(trial, s_trial);
        theta = std::move(trial);
        s = std::move(s_trial);
        f = f_trial;
        g = std::move(g_trial);
        return true;
      }
    }
    return false;
  };

  for (int iter = 1; iter <= options.max_iter; ++iter) {
    const double f_prev = f;

    Matrix H = problem.hessian(s);
    if (pinned) {
      H.row(0).setZero();
      H.col(0).setZero();
      H(0, 0) = 1.0;
    }
    const double damping = 1e-10 * (1.0 + H.diagonal().cwiseAbs().maxCoeff());
    H.diagonal().array() += damping;
    Eigen::LLT<Matrix> llt(H);
    bool moved = false;
    if (llt.info() == Eigen::Success) {
      Vector dir = -llt.solve(g);
      // Directions with no curvature (e.g. beta0 with no active sample) are
      // capped so the line search starts from a sensible length.
      const double cap = 10.0 * (1.0 + theta.norm());
      const double len = dir.norm();
      if (len > cap) dir *= cap / len;
      moved = dir.allFinite() && line_search(dir, 1.0);
    }
    if (!moved) {
      const double curvature = 1.0 + H.diagonal().maxCoeff();
      moved = line_search(-g, 1.0 / curvature);
    }
    if (!moved) {
      if (g.norm() <= 10.0 * options.tol) return to_state(theta, lambda);
      throw ConvergenceError("line search stalled at iteration " + std::to_string(iter) +
                                 " with gradient norm " + std::to_string(g.norm()),
                             to_state(theta, lambda), f);
    }
    if (f_prev - f < options.tol && g.norm() <= 10.0 * options.tol)
      return to_state(theta, lambda);
  }
  throw ConvergenceError("solve_mode did not converge within " + std::to_string(options.max_iter) +
                             " iterations",
                         to_state(theta, lambda), f);
}

}  // namespace bdwd
