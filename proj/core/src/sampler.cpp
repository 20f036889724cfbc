#include "bdwd/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "bdwd/dwd.hpp"
#include "bdwd/error.hpp"
#include "bdwd/parallel.hpp"
#include "bdwd/rng.hpp"
#include "bdwd/stats.hpp"

namespace bdwd {

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();
constexpr double min_proposal_var = 1e-8;

enum class Target { posterior, prior };

double logit(double p) { return std::log(p) - std::log1p(-p); }
double inv_logit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Chain state with cached scores and per-sample log-density contributions.
class ChainEngine {
 public:
  ChainEngine(const Dataset& data, const SamplerConfig& config, const LambdaPrior& prior,
              const PhiTable* table, ModelState initial, Target target)
      : data_(data),
        config_(config),
        prior_(prior),
        table_(table),
        target_(target),
        Xt_(data.X.transpose()),
        n_(static_cast<double>(data.size())),
        state_(std::move(initial)),
        P1_(data.P1),
        rng_(make_rng(config.seed, {0})) {
    label_.resize(data.size());
    for (Eigen::Index i = 0; i < data.size(); ++i)
      label_[i] = target == Target::prior ? 0.0 : sign_of(data.y[static_cast<std::size_t>(i)]);
    refresh();
    sd_ = config.initial_proposal_sd > 0.0 ? config.initial_proposal_sd
                                           : 1.0 / std::sqrt(state_.lambda * n_);
  }

  PosteriorDraws run() {
    const Eigen::Index d = state_.beta.size();
    PosteriorDraws out;
    out.mode = state_;
    out.states.reserve(config_.retained());
    out.log_post.reserve(config_.retained());
    out.proposal_sd_trace.reserve(static_cast<std::size_t>(config_.n_iter));
    std::vector<std::int64_t> acc_beta(static_cast<std::size_t>(d), 0);
    std::int64_t acc_beta0 = 0, acc_lambda = 0, acc_p1 = 0;
    const int burn = config_.effective_burn_in();

    Vector u_new(u_.size()), ell_new(ell_.size());
    for (int cycle = 1; cycle <= config_.n_iter; ++cycle) {
      cycle_ = cycle;
      out.proposal_sd_trace.push_back(sd_);
      for (Eigen::Index j = 0; j < d; ++j)
        if (update_coordinate(j, u_new, ell_new)) ++acc_beta[static_cast<std::size_t>(j)];
      if (target_ == Target::posterior && !config_.fixed_beta0 && update_beta0(u_new, ell_new))
        ++acc_beta0;
      if (config_.infer_lambda && target_ == Target::posterior && update_lambda()) ++acc_lambda;
      if (config_.infer_p1 && target_ == Target::posterior && update_p1(ell_new)) ++acc_p1;
      adapt();

      if (config_.refresh_every > 0 && cycle % config_.refresh_every == 0) refresh();
      if (config_.verify_every > 0 && cycle % config_.verify_every == 0) verify();

      if (cycle > burn && (cycle - burn) % config_.thin == 0) {
        out.states.push_back(state_);
        out.log_post.push_back(cached_log_density());
        if (config_.infer_p1) out.p1.push_back(P1_);
      }
    }
    const double iters = static_cast<double>(config_.n_iter);
    out.accept_beta.resize(static_cast<std::size_t>(d));
    for (std::size_t j = 0; j < acc_beta.size(); ++j)
      out.accept_beta[j] = static_cast<double>(acc_beta[j]) / iters;
    out.accept_beta0 = static_cast<double>(acc_beta0) / iters;
    out.accept_lambda = static_cast<double>(acc_lambda) / iters;
    out.accept_p1 = static_cast<double>(acc_p1) / iters;
    out.lambda_out_of_range = lambda_out_of_range_;
    out.lambda_inferred = config_.infer_lambda && target_ == Target::posterior;
    return out;
  }

 private:
  double contribution(Eigen::Index i, double u) const {
    const double y = label_[i];
    return y != 0.0 ? -dwd_loss(y * u) : log_mixture_term(u, P1_);
  }

  double penalty() const { return 0.5 * state_.lambda * n_ * state_.beta.squaredNorm(); }

  double cached_log_density() const { return ell_.sum() - penalty(); }

  void refresh() {
    u_ = scores(state_, data_.X);
    ell_.resize(u_.size());
    for (Eigen::Index i = 0; i < u_.size(); ++i) ell_[i] = contribution(i, u_[i]);
    check_finite(cached_log_density(), "score refresh");
  }

  void check_finite(double value, const char* where) const {
    if (!std::isfinite(value))
      throw NumericError(std::string("non-finite log density during ") + where + " at cycle " +
                         std::to_string(cycle_));
  }

  bool accept(double log_ratio) { return std::log(uniform01(rng_)) < log_ratio; }

  // Shift every score by delta * column, accumulating the change in log density.
  template <typename Shift>
  double propose_scores(Shift shift, Vector& u_new, Vector& ell_new) const {
    double delta = 0.0;
    for (Eigen::Index i = 0; i < u_.size(); ++i) {
      u_new[i] = u_[i] + shift(i);
      ell_new[i] = contribution(i, u_new[i]);
      delta += ell_new[i] - ell_[i];
    }
    return delta;
  }

  bool update_coordinate(Eigen::Index j, Vector& u_new, Vector& ell_new) {
    const double current = state_.beta[j];
    const double proposal = current + sd_ * std_normal(rng_);
    const double step = proposal - current;
    const auto col = Xt_.col(j);
    double log_ratio = propose_scores([&](Eigen::Index i) { return step * col[i]; }, u_new, ell_new);
    log_ratio -= 0.5 * state_.lambda * n_ * (proposal * proposal - current * current);
    check_finite(log_ratio, "beta update");
    if (!accept(log_ratio)) return false;
    state_.beta[j] = proposal;
    u_.swap(u_new);
    ell_.swap(ell_new);
    return true;
  }

  bool update_beta0(Vector& u_new, Vector& ell_new) {
    const double draw = config_.beta0_proposal_sd * std_normal(rng_);
    const double step =
        config_.beta0_proposal == Beta0Proposal::centered ? draw - state_.beta0 : draw;
    const double log_ratio = propose_scores([&](Eigen::Index) { return step; }, u_new, ell_new);
    check_finite(log_ratio, "beta0 update");
    if (!accept(log_ratio)) return false;
    state_.beta0 += step;
    u_.swap(u_new);
    ell_.swap(ell_new);
    return true;
  }

  // Terms of the lambda full conditional that depend on lambda.
  double lambda_target(double lambda, double beta_sq) const {
    return prior_.log_density(lambda) - log_phi_interp(*table_, lambda) -
           0.5 * lambda * n_ * beta_sq;
  }

  bool update_lambda() {
    const double current = state_.lambda;
    const double proposal = std::exp(std::log(current) + config_.lambda_step_sd * std_normal(rng_));
    const double u = uniform01(rng_);
    if (!prior_.contains(proposal) || proposal < table_->min_lambda() ||
        proposal > table_->max_lambda()) {
      ++lambda_out_of_range_;
      return false;
    }
    const double beta_sq = state_.beta.squaredNorm();
    // The log-scale random walk contributes the Jacobian lambda* / lambda.
    const double log_ratio = std::log(proposal) - std::log(current) +
                             lambda_target(proposal, beta_sq) - lambda_target(current, beta_sq);
    check_finite(log_ratio, "lambda update");
    if (!(std::log(u) < log_ratio)) return false;
    state_.lambda = proposal;
    return true;
  }

  bool update_p1(Vector& ell_new) {
    const double current = P1_;
    const double proposal = inv_logit(logit(current) + config_.p1_step_sd * std_normal(rng_));
    if (!(proposal > 0.0 && proposal < 1.0)) return false;
    double delta = 0.0;
    for (Eigen::Index i = 0; i < u_.size(); ++i) {
      if (label_[i] != 0.0) {
        ell_new[i] = ell_[i];
        continue;
      }
      ell_new[i] = log_mixture_term(u_[i], proposal);
      delta += ell_new[i] - ell_[i];
    }
    // Uniform prior on P1 seen through the logit random walk.
    const double log_ratio = delta + std::log(proposal * (1.0 - proposal)) -
                             std::log(current * (1.0 - current));
    check_finite(log_ratio, "P1 update");
    if (!accept(log_ratio)) return false;
    P1_ = proposal;
    ell_.swap(ell_new);
    return true;
  }

  void adapt() {
    const Eigen::Index d = state_.beta.size();
    // A single coefficient has no sample variance; keep the initial scale.
    if (d < 2) return;
    const double var = stats::sample_variance({state_.beta.data(), static_cast<std::size_t>(d)});
    sd_ = std::sqrt(std::max(0.5 * var, min_proposal_var));
  }

  void verify() const {
    Dataset view = data_;
    view.P1 = P1_;
    if (target_ == Target::prior) view = view.without_labels();
    const double full = target_ == Target::prior ? log_prior_beta(state_, view)
                                                 : log_posterior(state_, view);
    const double cached = cached_log_density();
    if (std::abs(full - cached) > 1e-10 * std::max(1.0, std::abs(full)))
      throw NumericError("cached log density " + std::to_string(cached) +
                         " drifted from full evaluation " + std::to_string(full) + " at cycle " +
                         std::to_string(cycle_));
  }

  const Dataset& data_;
  const SamplerConfig& config_;
  const LambdaPrior& prior_;
  const PhiTable* table_;
  Target target_;
  Matrix Xt_;
  Vector label_;
  double n_;
  ModelState state_;
  double P1_;
  Rng rng_;
  Vector u_;
  Vector ell_;
  double sd_ = 1.0;
  int cycle_ = 0;
  std::int64_t lambda_out_of_range_ = 0;
};

void check_table(const SamplerConfig& config, const LambdaPrior& prior, const PhiTable* table) {
  if (!config.infer_lambda) return;
  if (table == nullptr) throw InvalidArgument("lambda inference requires a phi table");
  table->validate();
  const double slack = 1e-12;
  if (table->min_lambda() > prior.lower * (1.0 + slack) ||
      table->max_lambda() < prior.upper * (1.0 - slack))
    throw InvalidArgument("phi table does not span the lambda prior support");
}

double initial_lambda(const SamplerConfig& config, const LambdaPrior& prior) {
  if (!config.infer_lambda) return config.fixed_lambda;
  return prior.contains(1.0) ? 1.0 : std::sqrt(prior.lower * prior.upper);
}

}  // namespace

SamplerConfig SamplerConfig::defaults(bool infer_lambda) {
  SamplerConfig c;
  c.infer_lambda = infer_lambda;
  c.n_iter = infer_lambda ? 10000 : 1000;
  return c;
}

void SamplerConfig::validate() const {
  if (n_iter < 1) throw ConfigError("n_iter must be positive");
  if (burn_in >= n_iter) throw ConfigError("burn_in must be smaller than n_iter");
  if (thin < 1) throw ConfigError("thin must be at least 1");
  if (!infer_lambda && !(fixed_lambda > 0.0 && std::isfinite(fixed_lambda)))
    throw ConfigError("fixed_lambda must be positive");
  if (!(beta0_proposal_sd > 0.0) || !(lambda_step_sd > 0.0) || !(p1_step_sd > 0.0))
    throw ConfigError("proposal scales must be positive");
  if (fixed_beta0 && !std::isfinite(*fixed_beta0)) throw ConfigError("fixed beta0 must be finite");
  if (refresh_every < 0 || verify_every < 0)
    throw ConfigError("refresh_every and verify_every must be non-negative");
}

ModelState initial_mode(const Dataset& data, double lambda, std::optional<double> fixed_beta0) {
  SolverOptions options;
  options.fixed_beta0 = fixed_beta0;
  if (data.fully_labeled()) return solve_mode(data, lambda, options);
  const Dataset labeled = data.labeled_part();
  const double scale = static_cast<double>(data.size()) / static_cast<double>(labeled.size());
  ModelState mode = solve_mode(labeled, lambda * scale, options);
  mode.lambda = lambda;
  return mode;
}

PosteriorDraws run_chain_from(const Dataset& data, const SamplerConfig& config,
                              const LambdaPrior& prior, const PhiTable* table,
                              ModelState initial) {
  data.validate();
  config.validate();
  prior.validate();
  if (data.count_labeled() == 0)
    throw InvalidArgument("posterior sampling needs at least one labeled sample");
  check_table(config, prior, table);
  if (initial.beta.size() != data.dim() || !initial.finite() || !(initial.lambda > 0.0))
    throw InvalidArgument("initial state must be finite, match the data, and have lambda > 0");
  if (config.infer_lambda && !prior.contains(initial.lambda))
    throw InvalidArgument("initial lambda lies outside the prior support");
  if (config.fixed_beta0) initial.beta0 = *config.fixed_beta0;
  ChainEngine engine(data, config, prior, table, std::move(initial), Target::posterior);
  return engine.run();
}

PosteriorDraws run_chain(const Dataset& data, const SamplerConfig& config,
                         const LambdaPrior& prior, const PhiTable* table) {
  data.validate();
  config.validate();
  prior.validate();
  if (data.count_labeled() == 0)
    throw InvalidArgument("posterior sampling needs at least one labeled sample");
  check_table(config, prior, table);
  return run_chain_from(data, config, prior, table,
                        initial_mode(data, initial_lambda(config, prior), config.fixed_beta0));
}

std::vector<PosteriorDraws> run_chains(const Dataset& data, const SamplerConfig& config,
                                       int chains, const LambdaPrior& prior,
                                       const PhiTable* table) {
  if (chains < 1) throw ConfigError("need at least one chain");
  const ModelState start =
      initial_mode(data, initial_lambda(config, prior), config.fixed_beta0);
  std::vector<PosteriorDraws> out(static_cast<std::size_t>(chains));
  parallel_for(out.size(), [&](std::size_t c) {
    SamplerConfig cfg = config;
    cfg.seed = substream_seed(config.seed, {c});
    out[c] = run_chain_from(data, cfg, prior, table, start);
  });
  return out;
}

PosteriorDraws sample_prior_beta(const Dataset& data, double lambda, double beta0,
                                 const SamplerConfig& config) {
  data.validate();
  config.validate();
  if (!(lambda > 0.0 && std::isfinite(lambda)))
    throw InvalidArgument("prior sampling requires lambda > 0");
  if (!std::isfinite(beta0)) throw InvalidArgument("beta0 must be finite");
  SamplerConfig cfg = config;
  cfg.infer_lambda = false;
  cfg.infer_p1 = false;
  cfg.fixed_lambda = lambda;
  const Dataset unlabeled = data.without_labels();
  const LambdaPrior prior{};
  ModelState start{Vector::Zero(data.dim()), beta0, lambda};
  ChainEngine engine(unlabeled, cfg, prior, nullptr, std::move(start), Target::prior);
  return engine.run();
}

ParamSummary summarize_values(std::string name, std::span<const double> values, double level) {
  if (values.empty()) throw InvalidArgument("cannot summarize an empty set of draws");
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("interval level must be in (0,1)");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  ParamSummary s;
  s.name = std::move(name);
  s.mean = stats::mean(values);
  s.median = stats::quantile_sorted(sorted, 0.5);
  s.lower = stats::quantile_sorted(sorted, 0.5 * (1.0 - level));
  s.upper = stats::quantile_sorted(sorted, 0.5 * (1.0 + level));
  return s;
}

PosteriorSummary summarize(const PosteriorDraws& draws, double level, const Matrix* X) {
  if (draws.states.empty()) throw InvalidArgument("cannot summarize an empty chain");
  const std::size_t T = draws.states.size();
  const Eigen::Index d = draws.states.front().beta.size();
  PosteriorSummary out;
  out.level = level;
  std::vector<double> buf(T);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (std::size_t t = 0; t < T; ++t) buf[t] = draws.states[t].beta[j];
    out.beta.push_back(summarize_values("beta_" + std::to_string(j + 1), buf, level));
  }
  for (std::size_t t = 0; t < T; ++t) buf[t] = draws.states[t].beta0;
  out.beta0 = summarize_values("beta0", buf, level);
  if (draws.lambda_inferred) {
    for (std::size_t t = 0; t < T; ++t) buf[t] = draws.states[t].lambda;
    out.lambda = summarize_values("lambda", buf, level);
  }

  if (X != nullptr) {
    if (X->rows() != d) throw InvalidArgument("score matrix dimension does not match draws");
    Matrix B(d, static_cast<Eigen::Index>(T));
    Vector b0(static_cast<Eigen::Index>(T));
    for (std::size_t t = 0; t < T; ++t) {
      B.col(static_cast<Eigen::Index>(t)) = draws.states[t].beta;
      b0[static_cast<Eigen::Index>(t)] = draws.states[t].beta0;
    }
    const Matrix U = (X->transpose() * B).rowwise() + b0.transpose();
    for (Eigen::Index i = 0; i < U.rows(); ++i) {
      for (std::size_t t = 0; t < T; ++t) buf[t] = U(i, static_cast<Eigen::Index>(t));
      out.scores.push_back(summarize_values("u_" + std::to_string(i + 1), buf, level));
    }
  }
  return out;
}

Vector predict_proba(const PosteriorDraws& draws, const Matrix& newX, double P1,
                     ProbabilityEstimator estimator) {
  if (!(P1 > 0.0 && P1 < 1.0)) throw InvalidArgument("P1 must lie strictly inside (0,1)");
  if (newX.rows() != draws.dim())
    throw InvalidArgument("feature dimension " + std::to_string(newX.rows()) +
                          " does not match the fitted dimension " + std::to_string(draws.dim()));
  Vector p(newX.cols());
  if (estimator == ProbabilityEstimator::mode) {
    const Vector u = scores(draws.mode, newX);
    for (Eigen::Index i = 0; i < u.size(); ++i) p[i] = class_probability(u[i], P1);
    return p;
  }
  if (draws.states.empty()) throw InvalidArgument("posterior-mean prediction needs draws");
  p.setZero();
  for (const auto& state : draws.states) {
    const Vector u = scores(state, newX);
    for (Eigen::Index i = 0; i < u.size(); ++i) p[i] += class_probability(u[i], P1);
  }
  return p / static_cast<double>(draws.states.size());
}

std::vector<Label> classify(const Vector& probabilities) {
  std::vector<Label> out(static_cast<std::size_t>(probabilities.size()));
  for (Eigen::Index i = 0; i < probabilities.size(); ++i)
    out[static_cast<std::size_t>(i)] = probabilities[i] >= 0.5 ? Label::positive : Label::negative;
  return out;
}

}  // namespace bdwd
