#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "bdwd/dwd.hpp"
#include "bdwd/intervals.hpp"
#include "bdwd/types.hpp"

namespace bdwd {

struct LaplaceOptions {
  /// Also build the joint (beta0, beta) covariance from the generalized Hessian
  /// including the intercept row and column.
  bool joint_intercept = false;
  /// Solve the mode with beta0 held at this value.
  std::optional<double> fixed_beta0;
};

/// Asymptotic normal approximation of beta | beta0 around the DWD solution.
struct LaplaceApprox {
  ModelState mode;
  /// (sum_{i in S} x_i x_i^T / (2 s_i^3) + n lambda I)^{-1}, s_i the signed score.
  Matrix cov_beta;
  /// Samples whose signed score at the mode strictly exceeds 1/2.
  std::vector<Eigen::Index> active_set;
  /// (d+1) x (d+1) covariance ordered (beta0, beta); only with joint_intercept.
  std::optional<Matrix> joint_cov;
};

/// Precision of beta at `mode`: the inverse of LaplaceApprox::cov_beta.
Matrix laplace_precision(const Dataset& data, const ModelState& mode);

LaplaceApprox laplace_fit(const Dataset& data, double lambda, const LaplaceOptions& options = {});
/// As laplace_fit, reusing a mode that was already computed.
LaplaceApprox laplace_from_mode(const Dataset& data, ModelState mode,
                                const LaplaceOptions& options = {});

/// beta_j +/- z sqrt(V_jj) and, for each column x of newX, beta0 + x^T beta +/- z sqrt(x^T V x)
/// with beta0 held at the mode. z is the standard normal quantile at (1 + level) / 2.
IntervalSet laplace_intervals(const LaplaceApprox& approx, double level,
                              const Matrix* newX = nullptr);

struct BootstrapResult {
  IntervalSet intervals;
  /// Resamples discarded because they held a single class.
  std::int64_t redraws = 0;
  std::vector<ModelState> fits;
};

/// Percentile intervals from B nonparametric resamples refit with solve_mode.
/// Resample b uses substream (seed, b); scores are evaluated at the columns of
/// scoreX (the training samples when null). fixed_beta0 pins the intercept in every refit.
BootstrapResult bootstrap_intervals(const Dataset& data, double lambda, int B, double level,
                                    std::uint64_t seed, const Matrix* scoreX = nullptr,
                                    std::optional<double> fixed_beta0 = std::nullopt);

}  // namespace bdwd
