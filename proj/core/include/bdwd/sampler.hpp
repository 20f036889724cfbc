#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bdwd/model.hpp"
#include "bdwd/types.hpp"

namespace bdwd {

/// random_walk centers the beta0 proposal at the current value. centered draws
/// N(0, sd^2) independently of the current value and accepts on the posterior
/// ratio alone, which leaves posterior x N(beta0; 0, sd^2) invariant.
enum class Beta0Proposal { random_walk, centered };

struct SamplerConfig {
  int n_iter = 1000;
  /// Negative means 10% of n_iter.
  int burn_in = -1;
  int thin = 1;
  bool infer_lambda = false;
  double fixed_lambda = 1.0;
  std::uint64_t seed = 1;
  /// Proposal sd for beta before the first adaptation; <= 0 means 1/sqrt(lambda0 n).
  double initial_proposal_sd = 0.0;
  double beta0_proposal_sd = 0.5;
  Beta0Proposal beta0_proposal = Beta0Proposal::random_walk;
  /// When set, beta0 is held at this value: no beta0 step, and the starting
  /// mode is solved with the intercept pinned.
  std::optional<double> fixed_beta0;
  /// sd of the log-scale random walk on lambda.
  double lambda_step_sd = 0.25;
  /// Extra Metropolis step on logit(P1) under a Uniform(0,1) prior.
  bool infer_p1 = false;
  double p1_step_sd = 0.25;
  /// Cycles between full recomputations of the cached scores.
  int refresh_every = 1000;
  /// Cycles between checks of the cached log posterior against a full
  /// re-evaluation; 0 disables the check.
  int verify_every = 0;

  /// 1000 cycles with lambda fixed, 10000 when lambda is inferred.
  static SamplerConfig defaults(bool infer_lambda);
  int effective_burn_in() const { return burn_in < 0 ? n_iter / 10 : burn_in; }
  std::size_t retained() const {
    return static_cast<std::size_t>((n_iter - effective_burn_in()) / thin);
  }
  void validate() const;
};

/// Retained chain states plus acceptance diagnostics.
struct PosteriorDraws {
  std::vector<ModelState> states;
  std::vector<double> log_post;
  /// Populated only when P1 is inferred.
  std::vector<double> p1;
  /// The state the chain started from (the conditional posterior mode).
  ModelState mode;
  std::vector<double> accept_beta;
  double accept_beta0 = 0.0;
  double accept_lambda = 0.0;
  double accept_p1 = 0.0;
  std::int64_t lambda_out_of_range = 0;
  bool lambda_inferred = false;
  /// sigma* in effect for each cycle's beta sweep.
  std::vector<double> proposal_sd_trace;

  Eigen::Index dim() const { return mode.beta.size(); }
  std::size_t size() const { return states.size(); }
};

/// Adaptive Metropolis-in-Gibbs for the (semi-supervised) posterior. Starts at
/// the conditional mode at lambda0 (fixed_lambda, or 1 when lambda is inferred).
/// `table` is required when infer_lambda is set.
PosteriorDraws run_chain(const Dataset& data, const SamplerConfig& config,
                         const LambdaPrior& prior = {}, const PhiTable* table = nullptr);

/// As run_chain, but starting from an explicit state.
PosteriorDraws run_chain_from(const Dataset& data, const SamplerConfig& config,
                              const LambdaPrior& prior, const PhiTable* table,
                              ModelState initial);

/// Independent chains on substreams (seed, chain_id), run concurrently.
std::vector<PosteriorDraws> run_chains(const Dataset& data, const SamplerConfig& config,
                                       int chains, const LambdaPrior& prior = {},
                                       const PhiTable* table = nullptr);

/// Conditional mode used to start chains: solve_mode on fully labeled data, or
/// on the labeled part with lambda rescaled by n / n_o so the penalty matches.
ModelState initial_mode(const Dataset& data, double lambda,
                        std::optional<double> fixed_beta0 = std::nullopt);

/// Same machinery targeting log_prior_beta with beta0 and lambda held fixed.
PosteriorDraws sample_prior_beta(const Dataset& data, double lambda, double beta0,
                                 const SamplerConfig& config);

struct ParamSummary {
  std::string name;
  double mean = 0.0;
  double median = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct PosteriorSummary {
  double level = 0.95;
  std::vector<ParamSummary> beta;
  ParamSummary beta0;
  std::optional<ParamSummary> lambda;
  /// Filled when summarize() is given a sample matrix.
  std::vector<ParamSummary> scores;
};

/// Posterior mean, median, and equal-tailed interval from type-7 quantiles at
/// (1 -/+ level) / 2.
ParamSummary summarize_values(std::string name, std::span<const double> values, double level);

/// Per-coordinate summaries; score summaries for the columns of `X` if given.
/// lambda is summarized only when it was inferred.
PosteriorSummary summarize(const PosteriorDraws& draws, double level,
                           const Matrix* X = nullptr);

enum class ProbabilityEstimator { mean, mode };

/// P(y = +1) for each column of newX: averaged over draws (mean) or at draws.mode.
Vector predict_proba(const PosteriorDraws& draws, const Matrix& newX, double P1,
                     ProbabilityEstimator estimator);

/// +1 when p >= 0.5, else -1.
std::vector<Label> classify(const Vector& probabilities);

}  // namespace bdwd
