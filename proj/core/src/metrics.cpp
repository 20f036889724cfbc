#include "bdwd/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "bdwd/error.hpp"

namespace bdwd {

namespace {

void check_lengths(Eigen::Index a, std::size_t b) {
  if (static_cast<std::size_t>(a) != b)
    throw InvalidArgument("length mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
}

}  // namespace

double metric_mse(const Vector& p, const std::vector<Label>& y, MseOrientation orientation) {
  check_lengths(p.size(), y.size());
  if (p.size() == 0) throw InvalidArgument("MSE of an empty test set");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double pi = p[i];
    if (!(pi >= 0.0 && pi <= 1.0)) throw InvalidArgument("probability outside [0,1]");
    const Label yi = y[static_cast<std::size_t>(i)];
    if (!is_labeled(yi)) throw InvalidArgument("MSE needs labeled test samples");
    const bool negative = yi == Label::negative;
    if (orientation == MseOrientation::as_printed)
      acc += negative ? (1.0 - pi) * (1.0 - pi) : pi * pi;
    else
      acc += negative ? pi * pi : (1.0 - pi) * (1.0 - pi);
  }
  return acc / static_cast<double>(p.size());
}

KlResult metric_kl(const Vector& p_est, const Vector& p_oracle, KlDirection direction) {
  if (p_est.size() != p_oracle.size())
    throw InvalidArgument("KL divergence needs equal-length probability vectors");
  if (p_est.size() == 0) throw InvalidArgument("KL divergence of empty vectors");
  constexpr double lo = 1e-12, hi = 1.0 - 1e-12;
  KlResult out;
  auto clamp = [&](double p) {
    if (p < lo) {
      ++out.clamped;
      return lo;
    }
    if (p > hi) {
      ++out.clamped;
      return hi;
    }
    return p;
  };
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p_est.size(); ++i) {
    double a = clamp(p_oracle[i]);
    double b = clamp(p_est[i]);
    if (direction == KlDirection::estimate_to_oracle) std::swap(a, b);
    acc += a * std::log(a / b) + (1.0 - a) * std::log((1.0 - a) / (1.0 - b));
  }
  out.value = acc / static_cast<double>(p_est.size());
  return out;
}

double metric_coverage(const std::vector<Interval>& intervals, const Vector& truth) {
  check_lengths(truth.size(), intervals.size());
  if (intervals.empty()) throw InvalidArgument("coverage of an empty interval set");
  std::size_t hit = 0;
  for (std::size_t k = 0; k < intervals.size(); ++k)
    hit += intervals[k].contains(truth[static_cast<Eigen::Index>(k)]) ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(intervals.size());
}

double mean_width(const std::vector<Interval>& intervals) {
  if (intervals.empty()) throw InvalidArgument("mean width of an empty interval set");
  double acc = 0.0;
  for (const auto& iv : intervals) acc += iv.width();
  return acc / static_cast<double>(intervals.size());
}

double misclassification(const Vector& p, const std::vector<Label>& y) {
  check_lengths(p.size(), y.size());
  std::size_t wrong = 0, total = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const Label yi = y[static_cast<std::size_t>(i)];
    if (!is_labeled(yi)) continue;
    const Label call = p[i] >= 0.5 ? Label::positive : Label::negative;
    wrong += call != yi ? 1 : 0;
    ++total;
  }
  if (total == 0) throw InvalidArgument("misclassification needs labeled samples");
  return static_cast<double>(wrong) / static_cast<double>(total);
}

double CalibrationBin::proportion() const {
  return count > 0 ? static_cast<double>(positives) / static_cast<double>(count)
                   : std::numeric_limits<double>::quiet_NaN();
}

std::vector<CalibrationBin> calibration_bins(const Vector& p, const std::vector<Label>& y,
                                             double width) {
  check_lengths(p.size(), y.size());
  if (!(width > 0.0 && width <= 1.0)) throw InvalidArgument("bin width must be in (0,1]");
  const double k_real = 1.0 / width;
  const auto K = static_cast<std::int64_t>(std::llround(k_real));
  if (std::abs(k_real - static_cast<double>(K)) > 1e-9 * k_real)
    throw InvalidArgument("bin width must divide 1 evenly");
  // Boundaries are k / K so that e.g. 3 / 50 is the double nearest 0.06.
  auto boundary = [K](std::int64_t k) { return static_cast<double>(k) / static_cast<double>(K); };

  std::vector<CalibrationBin> bins(static_cast<std::size_t>(K));
  for (std::int64_t k = 0; k < K; ++k) {
    bins[static_cast<std::size_t>(k)].lower = boundary(k);
    bins[static_cast<std::size_t>(k)].upper = boundary(k + 1);
  }
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double pi = p[i];
    if (!(pi >= 0.0 && pi <= 1.0)) throw InvalidArgument("probability outside [0,1]");
    const Label yi = y[static_cast<std::size_t>(i)];
    if (!is_labeled(yi)) continue;
    auto k = std::min<std::int64_t>(static_cast<std::int64_t>(std::floor(pi * static_cast<double>(K))), K - 1);
    while (k + 1 < K && pi >= boundary(k + 1)) ++k;
    while (k > 0 && pi < boundary(k)) --k;
    auto& bin = bins[static_cast<std::size_t>(k)];
    ++bin.count;
    bin.positives += yi == Label::positive ? 1 : 0;
  }
  return bins;
}

void merge_bins(std::vector<CalibrationBin>& into, const std::vector<CalibrationBin>& from) {
  if (into.empty()) {
    into = from;
    return;
  }
  if (into.size() != from.size()) throw InvalidArgument("calibration bin layouts differ");
  for (std::size_t k = 0; k < into.size(); ++k) {
    into[k].count += from[k].count;
    into[k].positives += from[k].positives;
  }
}

}  // namespace bdwd
