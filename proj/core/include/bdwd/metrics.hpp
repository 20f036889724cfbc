#pragma once

#include <cstdint>
#include <vector>

#include "bdwd/intervals.hpp"
#include "bdwd/types.hpp"

namespace bdwd {

/// as_printed pairs (1 - p)^2 with y = -1 and p^2 with y = +1; conventional
/// swaps the pairing so p is scored as P(y = +1).
enum class MseOrientation { as_printed, conventional };

double metric_mse(const Vector& p, const std::vector<Label>& y,
                  MseOrientation orientation = MseOrientation::as_printed);

enum class KlDirection { oracle_to_estimate, estimate_to_oracle };

struct KlResult {
  double value = 0.0;
  /// Probabilities moved into [1e-12, 1 - 1e-12].
  std::int64_t clamped = 0;
};

/// Mean pointwise Bernoulli KL divergence; oracle_to_estimate is KL(oracle || estimate).
KlResult metric_kl(const Vector& p_est, const Vector& p_oracle,
                   KlDirection direction = KlDirection::oracle_to_estimate);

/// Fraction of intervals containing the matching truth value (closed endpoints).
double metric_coverage(const std::vector<Interval>& intervals, const Vector& truth);

double mean_width(const std::vector<Interval>& intervals);

/// Fraction of labeled samples where the p >= 0.5 decision disagrees with y.
double misclassification(const Vector& p, const std::vector<Label>& y);

struct CalibrationBin {
  double lower = 0.0;
  double upper = 0.0;
  std::int64_t count = 0;
  std::int64_t positives = 0;

  double midpoint() const { return 0.5 * (lower + upper); }
  bool defined() const { return count > 0; }
  /// NaN for an empty bin.
  double proportion() const;
};

/// Half-open bins [k w, (k + 1) w); the last bin is closed at 1.
std::vector<CalibrationBin> calibration_bins(const Vector& p, const std::vector<Label>& y,
                                             double width = 0.02);

/// Adds the counts of `from` into `into`; bin layouts must match.
void merge_bins(std::vector<CalibrationBin>& into, const std::vector<CalibrationBin>& from);

}  // namespace bdwd
