#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bdwd/rng.hpp"
#include "bdwd/types.hpp"

namespace bdwd {

/// Uniform prior on the penalty lambda.
struct LambdaPrior {
  double lower = 1.0 / 128.0;
  double upper = 128.0;

  void validate() const;
  bool contains(double lambda) const { return lambda >= lower && lambda <= upper; }
  double log_density(double lambda) const;
};

/// P(y = +1 | u) for the DWD link with marginal class probability P1.
double class_probability(double u, double P1);

/// log(P1 e^{-V(u)} + (1 - P1) e^{-V(-u)}): one factor of the label-free prior term.
double log_mixture_term(double u, double P1);

/// f(u) = e^{-V(u)} + e^{-V(-u)}.
double prior_score_term(double u);

/// Unnormalized log posterior. Labeled samples contribute -V(y_i u_i), unlabeled
/// samples log_mixture_term(u_i, P1), and the penalty is (lambda n / 2) ||beta||^2
/// with n counting every sample. Equals -n * objective() on fully labeled data.
double log_posterior(const ModelState& state, const Dataset& data);

/// log A + log B: the label-free conditional prior of beta given beta0 and lambda.
double log_prior_beta(const ModelState& state, const Dataset& data);

/// Monte Carlo estimates of log phi(X, lambda_j, beta0) on a log-equispaced grid.
struct PhiTable {
  std::vector<double> lambda_grid;
  std::vector<double> log_phi;
  std::int64_t mc_samples = 0;
  std::uint64_t seed = 0;
  double beta0_ref = 0.0;
  double P1 = 0.5;

  void validate() const;
  double min_lambda() const { return lambda_grid.front(); }
  double max_lambda() const { return lambda_grid.back(); }
};

struct PhiOptions {
  int grid_points = 25;
  std::int64_t mc_samples = 500;
  /// Upper bound on grid_points * mc_samples * n * d multiply-adds.
  double max_work = 2e11;
};

/// One grid point: log phi-hat and the standard error of phi-hat relative to phi-hat.
struct PhiPointEstimate {
  double log_phi = 0.0;
  double relative_se = 0.0;
};

PhiPointEstimate estimate_phi_point(const Dataset& data, double lambda, double beta0,
                                    std::int64_t mc_samples, Rng& rng);

/// Builds the table; grid point j uses the RNG substream (seed, j).
PhiTable estimate_phi_table(const Dataset& data, const LambdaPrior& prior, double beta0,
                            std::uint64_t seed, const PhiOptions& options = {});

/// Piecewise-linear interpolation of log phi in log lambda. Throws RangeError
/// outside [min_lambda, max_lambda].
double log_phi_interp(const PhiTable& table, double lambda);

/// log p(lambda | X, y, beta, beta0) up to a constant: prior + A-term - log phi-hat -
/// (lambda n / 2) ||beta||^2. -inf outside the prior support or the table range.
double log_lambda_conditional(const ModelState& state, const Dataset& data,
                              const LambdaPrior& prior, const PhiTable& table);

}  // namespace bdwd
