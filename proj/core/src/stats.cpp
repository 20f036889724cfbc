#include "bdwd/stats.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "bdwd/error.hpp"

namespace bdwd::stats {

double mean(std::span<const double> x) {
  if (x.empty()) throw InvalidArgument("mean of an empty sample");
  double acc = 0.0;
  for (double v : x) acc += v;
  return acc / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double acc = 0.0;
  for (double v : x) acc += (v - m) * (v - m);
  return acc / static_cast<double>(x.size() - 1);
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw InvalidArgument("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("quantile level must be in [0,1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double quantile(std::span<const double> x, double p) {
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  return quantile_sorted(s, p);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("normal quantile requires p in (0,1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double normal_cdf(double x) {
  return boost::math::cdf(boost::math::normal_distribution<double>(), x);
}

double batch_means_se(std::span<const double> x, std::size_t batches) {
  if (batches < 2 || x.size() < batches)
    throw InvalidArgument("batch means need at least two batches of one value");
  const std::size_t len = x.size() / batches;
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b) means[b] = mean(x.subspan(b * len, len));
  return std::sqrt(sample_variance(means) / static_cast<double>(batches));
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
  if (chains.empty()) throw InvalidArgument("split R-hat needs at least one chain");
  const std::size_t len = chains.front().size() / 2;
  if (len < 2) throw InvalidArgument("split R-hat needs chains of length >= 4");
  std::vector<std::span<const double>> halves;
  for (const auto& c : chains) {
    if (c.size() / 2 != len) throw InvalidArgument("split R-hat needs equal-length chains");
    halves.emplace_back(c.data(), len);
    halves.emplace_back(c.data() + c.size() - len, len);
  }
  std::vector<double> means, vars;
  for (auto h : halves) {
    means.push_back(mean(h));
    vars.push_back(sample_variance(h));
  }
  const double w = mean(vars);
  const double b = static_cast<double>(len) * sample_variance(means);
  const double n = static_cast<double>(len);
  const double var_plus = (n - 1.0) / n * w + b / n;
  return w > 0.0 ? std::sqrt(var_plus / w) : 1.0;
}

double ks_distance(std::span<const double> x, const std::function<double(double)>& cdf) {
  if (x.empty()) throw InvalidArgument("KS distance of an empty sample");
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double f = cdf(s[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

}  // namespace bdwd::stats
