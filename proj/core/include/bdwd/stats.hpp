#pragma once

#include <functional>
#include <span>
#include <vector>

namespace bdwd::stats {

double mean(std::span<const double> x);
/// Unbiased sample variance (denominator n - 1); 0 for fewer than two values.
double sample_variance(std::span<const double> x);

/// Inclusive linear-interpolation quantile (R type 7) of already sorted data.
double quantile_sorted(std::span<const double> sorted, double p);
/// Convenience: copies, sorts, and calls quantile_sorted.
double quantile(std::span<const double> x, double p);

/// Standard normal quantile function.
double normal_quantile(double p);
double normal_cdf(double x);

/// Standard error of the mean from non-overlapping batch means.
double batch_means_se(std::span<const double> x, std::size_t batches = 20);

/// Split potential scale reduction factor over equal-length chains.
double split_rhat(const std::vector<std::vector<double>>& chains);

/// Kolmogorov-Smirnov distance between the empirical CDF of x and `cdf`.
double ks_distance(std::span<const double> x, const std::function<double(double)>& cdf);

}  // namespace bdwd::stats
