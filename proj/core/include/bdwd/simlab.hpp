#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bdwd/metrics.hpp"
#include "bdwd/model.hpp"
#include "bdwd/sampler.hpp"
#include "bdwd/types.hpp"

namespace bdwd {

enum class ScenarioKind {
  assumed_uniform,
  assumed_exponential,
  assumed_bimodal,
  two_class_gaussian,
  semisup_bimodal,
  semisup_unimodal,
};

/// Hyphenated names: "assumed-uniform", "two-class-gaussian", ...
std::string_view to_string(ScenarioKind kind);
ScenarioKind parse_scenario_kind(std::string_view name);

bool is_assumed(ScenarioKind kind);
bool is_semisup(ScenarioKind kind);

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::assumed_uniform;
  int d = 20;
  int n = 100;
  int n_test = 1000;
  /// Penalty used to draw beta_true (assumed-model kinds).
  double lambda_true = 1.0;
  /// sd of the class mean entries (Gaussian and semisup-bimodal kinds).
  double tau = 0.0;
  int n_o = 10;
  int n_u = 0;
  int replications = 1;
  std::uint64_t seed = 1;
  /// sd of the mixture mean entries for assumed-bimodal; sqrt(0.5) is variance 0.5.
  double bimodal_mean_sd = 0.7071067811865476;
  /// Metropolis cycles used to draw beta_true from its conditional prior.
  int prior_cycles = 1000;

  /// Semi-supervised spec at d = 100 (tau = 0.3 for the bimodal kind), n = n_o + n_u.
  static ScenarioSpec semisup(ScenarioKind kind, int n_o, int n_u);
  /// Two-class Gaussian spec at n = 100 with a 5000-sample test set.
  static ScenarioSpec gaussian(int d, double tau);

  void validate() const;
};

/// Class means of the two-class Gaussian generator.
struct OracleModel {
  Vector mu0;
  Vector mu1;
};

/// Bayes posterior P(y = +1 | x) for unit-covariance classes with equal priors.
double oracle_probability(const OracleModel& oracle, const Eigen::Ref<const Vector>& x);
/// oracle_probability for each column of X.
Vector oracle_probabilities(const OracleModel& oracle, const Matrix& X);

struct AssumedData {
  Dataset train;
  Dataset test;
  Vector beta_true;
};

struct GaussianData {
  Dataset train;
  Dataset test;
  OracleModel oracle;
};

struct SemisupData {
  Dataset train;
  Dataset test;
  /// Labeled blocks redrawn because they held a single class (unimodal kind).
  std::int64_t label_redraws = 0;
};

/// Replication `rep` uses the RNG substreams (seed, rep, *).
AssumedData gen_assumed(const ScenarioSpec& spec, std::uint64_t rep = 0);
GaussianData gen_gaussian(const ScenarioSpec& spec, std::uint64_t rep = 0);
SemisupData gen_semisup(const ScenarioSpec& spec, std::uint64_t rep = 0);

struct MethodConfig {
  bool mcmc = true;
  bool clt = false;
  bool boot = false;
  /// seed is ignored; chains use per-replication substreams.
  SamplerConfig sampler;
  LambdaPrior prior;
  PhiOptions phi;
  int bootstrap_B = 200;
  double level = 0.95;
  /// Fitting penalty when lambda is fixed. Defaults to lambda_true for
  /// assumed-model kinds and sampler.fixed_lambda otherwise.
  std::optional<double> fit_lambda;
  /// Assumed-model kinds generate with beta0 = 0; when true every fit (chain,
  /// CLT, bootstrap, sweep) holds beta0 at that value. Ignored for other kinds.
  bool pin_true_intercept = true;
  /// Additional fixed-lambda fits scored by KL, MSE, and misclassification.
  std::vector<double> lambda_sweep;
  int sweep_cycles = 1000;
  MseOrientation mse = MseOrientation::as_printed;
  KlDirection kl = KlDirection::oracle_to_estimate;
  double calibration_width = 0.02;

  void validate() const;
};

/// `count` values from lower to upper, equally spaced on the log scale.
std::vector<double> log_spaced(double lower, double upper, int count);

struct MethodCoverage {
  static constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  double beta = nan;
  double u = nan;
  double width_beta = nan;
  double width_u = nan;
};

struct SweepPoint {
  double lambda = 0.0;
  double kl = 0.0;
  double mse = 0.0;
  double misclass = 0.0;
};

struct ReplicationRecord {
  static constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  int replication = 0;
  MethodCoverage mcmc;
  MethodCoverage clt;
  MethodCoverage boot;
  /// Posterior mean of lambda when inferred, the fixed value otherwise.
  double lambda_mean = nan;
  double kl = nan;
  std::int64_t kl_clamped = 0;
  double mse = nan;
  double misclass = nan;
  double accept_beta = nan;
  std::int64_t lambda_out_of_range = 0;
  std::int64_t boot_redraws = 0;
  std::vector<SweepPoint> sweep;
};

struct SimReport {
  ScenarioSpec spec;
  MethodConfig methods;
  std::vector<ReplicationRecord> records;
  /// Test-set calibration aggregated over replications (MCMC fits only).
  std::vector<CalibrationBin> calibration_mean;
  std::vector<CalibrationBin> calibration_mode;
};

/// Generates, fits, and scores every replication. Replications run concurrently;
/// a failure aborts the run with a message naming the replication index.
SimReport run_scenario(const ScenarioSpec& spec, const MethodConfig& methods);

/// Average of a record field over replications; NaN when any record lacks it.
template <typename Field>
double average(const SimReport& report, Field field) {
  if (report.records.empty()) return std::numeric_limits<double>::quiet_NaN();
  double acc = 0.0;
  for (const auto& r : report.records) acc += field(r);
  return acc / static_cast<double>(report.records.size());
}

struct Table1Row {
  std::string distribution;
  int n = 0;
  int d = 0;
  double lambda = 0.0;
  MethodCoverage mcmc;
  MethodCoverage clt;
  MethodCoverage boot;
  int replications = 0;
};

struct Table2Row {
  int d = 0;
  double tau = 0.0;
  double lambda_hat = 0.0;
  double lambda_kl = 0.0;
  double lambda_mse = 0.0;
  double kl_hat = 0.0;
  double kl_best = 0.0;
  double mse_hat = 0.0;
  double mse_best = 0.0;
  double misclass_hat = 0.0;
  int replications = 0;
};

struct Table3Row {
  std::string scenario;
  int n_o = 0;
  int n_u = 0;
  double misclass = 0.0;
  int replications = 0;
};

Table1Row table1_row(const SimReport& report);
/// Best fixed lambda per metric is the sweep value minimizing the replication mean.
Table2Row table2_row(const SimReport& report);
Table3Row table3_row(const SimReport& report);

}  // namespace bdwd
