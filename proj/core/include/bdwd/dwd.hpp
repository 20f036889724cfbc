#pragma once

#include <optional>

#include "bdwd/error.hpp"
#include "bdwd/types.hpp"

namespace bdwd {

/// DWD loss: 1 - u for u <= 1/2, 1/(4u) otherwise. Convex, C1, strictly positive.
double dwd_loss(double u);
/// First derivative of dwd_loss; -1 on the linear branch.
double dwd_loss_grad(double u);
/// Second derivative away from the knot: 0 for u <= 1/2, 1/(2u^3) otherwise.
double dwd_loss_curvature(double u);

/// u_i = beta0 + x_i^T beta, accumulated left to right starting from beta0.
Scores scores(const ModelState& state, const Dataset& data);
/// Scores for an arbitrary d x m matrix of samples.
Vector scores(const ModelState& state, const Matrix& X);

/// psi = (1/n) sum_i V(y_i u_i) + (lambda/2) ||beta||^2 over fully labeled data.
double objective(const ModelState& state, const Dataset& data);

struct ObjectiveGradient {
  Vector beta;
  double beta0 = 0.0;
};

ObjectiveGradient objective_grad(const ModelState& state, const Dataset& data);

struct SolverOptions {
  double tol = 1e-10;
  int max_iter = 50000;
  /// When set, beta0 is held at this value and only beta is optimized.
  std::optional<double> fixed_beta0;
};

/// Thrown when the solver runs out of iterations; carries the best iterate seen.
class ConvergenceError : public NumericError {
 public:
  ConvergenceError(const std::string& what, ModelState best, double best_objective)
      : NumericError(what), best_(std::move(best)), best_objective_(best_objective) {}

  const ModelState& best() const noexcept { return best_; }
  double best_objective() const noexcept { return best_objective_; }

 private:
  ModelState best_;
  double best_objective_;
};

/// Global minimizer of objective() at the given lambda.
///
/// Damped semismooth Newton on (beta0, beta): the generalized Hessian uses the
/// curvature of the 1/(4u) branch only, every step is safeguarded by a
/// backtracking Armijo search, and a plain gradient step is taken whenever the
/// Newton direction fails to make progress. lambda == 0 is accepted only when
/// d < n and [1, X^T] has full column rank.
ModelState solve_mode(const Dataset& data, double lambda, const SolverOptions& options = {});

}  // namespace bdwd
