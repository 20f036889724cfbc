#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bdwd/sampler.hpp"

namespace bdwd {

struct Interval {
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;

  double width() const { return upper - lower; }
  /// Closed interval membership.
  bool contains(double value) const { return value >= lower && value <= upper; }
};

/// Coefficient and score intervals from one inference method ("mcmc", "clt", "boot").
struct IntervalSet {
  std::string method;
  double level = 0.95;
  std::vector<Interval> beta;
  std::optional<Interval> beta0;
  std::optional<Interval> lambda;
  std::vector<Interval> scores;
};

/// One row of the interval CSV schema: param, estimate, lower, upper, method.
struct IntervalRow {
  std::string param;
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::string method;
};

std::vector<IntervalRow> to_rows(const IntervalSet& set);

/// MCMC intervals: posterior mean as the estimate, equal-tailed quantile bounds.
IntervalSet to_interval_set(const PosteriorSummary& summary, std::string method = "mcmc");

}  // namespace bdwd
