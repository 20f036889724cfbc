#include "bdwd/simlab.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "bdwd/dwd.hpp"
#include "bdwd/error.hpp"
#include "bdwd/laplace.hpp"
#include "bdwd/parallel.hpp"
#include "bdwd/rng.hpp"
#include "bdwd/stats.hpp"

namespace bdwd {

namespace {

// Substream tags under (seed, rep).
constexpr std::uint64_t kData = 0;
constexpr std::uint64_t kPriorChain = 1;
constexpr std::uint64_t kChain = 2;
constexpr std::uint64_t kBoot = 3;
constexpr std::uint64_t kPhi = 4;
constexpr std::uint64_t kSweep = 5;

constexpr std::array<std::pair<ScenarioKind, std::string_view>, 6> kKindNames{{
    {ScenarioKind::assumed_uniform, "assumed-uniform"},
    {ScenarioKind::assumed_exponential, "assumed-exponential"},
    {ScenarioKind::assumed_bimodal, "assumed-bimodal"},
    {ScenarioKind::two_class_gaussian, "two-class-gaussian"},
    {ScenarioKind::semisup_bimodal, "semisup-bimodal"},
    {ScenarioKind::semisup_unimodal, "semisup-unimodal"},
}};

Vector normal_vector(Eigen::Index d, double sd, Rng& rng) {
  Vector v(d);
  for (Eigen::Index j = 0; j < d; ++j) v[j] = sd * std_normal(rng);
  return v;
}

/// Columns drawn one at a time, entries in row order.
Matrix draw_assumed_X(const ScenarioSpec& spec, int m, const Vector& mu0, const Vector& mu1,
                      Rng& rng) {
  Matrix X(spec.d, m);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  for (int i = 0; i < m; ++i) {
    switch (spec.kind) {
      case ScenarioKind::assumed_uniform:
        for (int j = 0; j < spec.d; ++j) X(j, i) = unif(rng);
        break;
      case ScenarioKind::assumed_exponential:
        for (int j = 0; j < spec.d; ++j) X(j, i) = expo(rng) - 1.0;
        break;
      case ScenarioKind::assumed_bimodal: {
        const Vector& mu = uniform01(rng) < 0.5 ? mu0 : mu1;
        for (int j = 0; j < spec.d; ++j) X(j, i) = mu[j] + std_normal(rng);
        break;
      }
      default:
        throw InvalidArgument("not an assumed-model scenario");
    }
  }
  return X;
}

std::vector<Label> draw_link_labels(const Vector& u, double P1, Rng& rng) {
  std::vector<Label> y(static_cast<std::size_t>(u.size()));
  for (Eigen::Index i = 0; i < u.size(); ++i)
    y[static_cast<std::size_t>(i)] =
        uniform01(rng) < class_probability(u[i], P1) ? Label::positive : Label::negative;
  return y;
}

/// Balanced two-class Gaussian block: the first m/2 samples are class -1.
Dataset gaussian_block(const OracleModel& oracle, int m, Rng& rng) {
  const Eigen::Index d = oracle.mu0.size();
  Dataset out;
  out.X.resize(d, m);
  out.y.resize(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const bool negative = i < m / 2;
    const Vector& mu = negative ? oracle.mu0 : oracle.mu1;
    for (Eigen::Index j = 0; j < d; ++j) out.X(j, i) = mu[j] + std_normal(rng);
    out.y[static_cast<std::size_t>(i)] = negative ? Label::negative : Label::positive;
  }
  return out;
}

/// Standard normal features labeled by sign(x^T beta_sep); zero scores map to +1.
Dataset unimodal_block(const Vector& beta_sep, int m, Rng& rng) {
  const Eigen::Index d = beta_sep.size();
  Dataset out;
  out.X.resize(d, m);
  out.y.resize(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) out.X(j, i) = std_normal(rng);
    out.y[static_cast<std::size_t>(i)] =
        out.X.col(i).dot(beta_sep) >= 0.0 ? Label::positive : Label::negative;
  }
  return out;
}

Dataset concat(const Dataset& a, const Dataset& b) {
  Dataset out;
  out.X.resize(a.dim(), a.size() + b.size());
  out.X.leftCols(a.size()) = a.X;
  out.X.rightCols(b.size()) = b.X;
  out.y = a.y;
  out.y.insert(out.y.end(), b.y.begin(), b.y.end());
  out.P1 = a.P1;
  return out;
}

double fit_lambda_for(const ScenarioSpec& spec, const MethodConfig& methods) {
  if (methods.fit_lambda) return *methods.fit_lambda;
  return is_assumed(spec.kind) ? spec.lambda_true : methods.sampler.fixed_lambda;
}

double start_lambda(const LambdaPrior& prior) {
  return prior.contains(1.0) ? 1.0 : std::sqrt(prior.lower * prior.upper);
}

std::vector<double> lambda_column(const PosteriorDraws& draws) {
  std::vector<double> out;
  out.reserve(draws.size());
  for (const auto& s : draws.states) out.push_back(s.lambda);
  return out;
}

MethodCoverage coverage_of(const IntervalSet& set, const Vector& beta_true, const Vector& u_true) {
  MethodCoverage c;
  c.beta = metric_coverage(set.beta, beta_true);
  c.u = metric_coverage(set.scores, u_true);
  c.width_beta = mean_width(set.beta);
  c.width_u = mean_width(set.scores);
  return c;
}

struct Replicate {
  Dataset train;
  Dataset test;
  std::optional<Vector> beta_true;
  std::optional<Vector> p_oracle;
};

Replicate generate(const ScenarioSpec& spec, std::uint64_t rep) {
  Replicate r;
  if (is_assumed(spec.kind)) {
    AssumedData g = gen_assumed(spec, rep);
    r.p_oracle = Vector(g.test.size());
    const Vector u_test = g.test.X.transpose() * g.beta_true;
    for (Eigen::Index i = 0; i < u_test.size(); ++i)
      (*r.p_oracle)[i] = class_probability(u_test[i], g.test.P1);
    r.train = std::move(g.train);
    r.test = std::move(g.test);
    r.beta_true = std::move(g.beta_true);
  } else if (spec.kind == ScenarioKind::two_class_gaussian) {
    GaussianData g = gen_gaussian(spec, rep);
    r.p_oracle = oracle_probabilities(g.oracle, g.test.X);
    r.train = std::move(g.train);
    r.test = std::move(g.test);
  } else {
    SemisupData g = gen_semisup(spec, rep);
    r.train = std::move(g.train);
    r.test = std::move(g.test);
  }
  return r;
}

struct ReplicationOutput {
  ReplicationRecord record;
  std::vector<CalibrationBin> bins_mean;
  std::vector<CalibrationBin> bins_mode;
};

ReplicationOutput run_replication(const ScenarioSpec& spec, const MethodConfig& methods,
                                  std::uint64_t rep) {
  ReplicationOutput out;
  ReplicationRecord& rec = out.record;
  rec.replication = static_cast<int>(rep);
  const Replicate r = generate(spec, rep);
  const double lambda = fit_lambda_for(spec, methods);
  std::optional<Vector> u_true;
  if (r.beta_true) u_true = r.train.X.transpose() * *r.beta_true;
  std::optional<double> pinned;
  if (is_assumed(spec.kind) && methods.pin_true_intercept) pinned = 0.0;

  if (methods.mcmc) {
    SamplerConfig sc = methods.sampler;
    sc.fixed_beta0 = pinned;
    sc.seed = substream_seed(spec.seed, {rep, kChain});
    PosteriorDraws draws;
    if (sc.infer_lambda) {
      const ModelState start = initial_mode(r.train, start_lambda(methods.prior), pinned);
      const PhiTable table = estimate_phi_table(r.train, methods.prior, start.beta0,
                                                substream_seed(spec.seed, {rep, kPhi}),
                                                methods.phi);
      draws = run_chain_from(r.train, sc, methods.prior, &table, start);
      const auto lam = lambda_column(draws);
      rec.lambda_mean = stats::mean(lam);
    } else {
      sc.fixed_lambda = lambda;
      draws = run_chain(r.train, sc, methods.prior);
      rec.lambda_mean = lambda;
    }
    rec.lambda_out_of_range = draws.lambda_out_of_range;
    double acc = 0.0;
    for (double a : draws.accept_beta) acc += a;
    rec.accept_beta = acc / static_cast<double>(draws.accept_beta.size());

    if (r.beta_true) {
      const PosteriorSummary summary = summarize(draws, methods.level, &r.train.X);
      rec.mcmc = coverage_of(to_interval_set(summary), *r.beta_true, *u_true);
    }
    const Vector p_mean = predict_proba(draws, r.test.X, r.train.P1, ProbabilityEstimator::mean);
    const Vector p_mode = predict_proba(draws, r.test.X, r.train.P1, ProbabilityEstimator::mode);
    rec.mse = metric_mse(p_mean, r.test.y, methods.mse);
    rec.misclass = misclassification(p_mean, r.test.y);
    if (r.p_oracle) {
      const KlResult kl = metric_kl(p_mean, *r.p_oracle, methods.kl);
      rec.kl = kl.value;
      rec.kl_clamped = kl.clamped;
    }
    out.bins_mean = calibration_bins(p_mean, r.test.y, methods.calibration_width);
    out.bins_mode = calibration_bins(p_mode, r.test.y, methods.calibration_width);
  }

  if (methods.clt) {
    LaplaceOptions lo;
    lo.fixed_beta0 = pinned;
    const LaplaceApprox approx = laplace_fit(r.train, lambda, lo);
    rec.clt = coverage_of(laplace_intervals(approx, methods.level, &r.train.X), *r.beta_true,
                          *u_true);
  }
  if (methods.boot) {
    const BootstrapResult boot =
        bootstrap_intervals(r.train, lambda, methods.bootstrap_B, methods.level,
                            substream_seed(spec.seed, {rep, kBoot}), nullptr, pinned);
    rec.boot = coverage_of(boot.intervals, *r.beta_true, *u_true);
    rec.boot_redraws = boot.redraws;
  }

  for (std::size_t k = 0; k < methods.lambda_sweep.size(); ++k) {
    SamplerConfig sk = methods.sampler;
    sk.infer_lambda = false;
    sk.fixed_beta0 = pinned;
    sk.n_iter = methods.sweep_cycles;
    sk.burn_in = -1;
    sk.fixed_lambda = methods.lambda_sweep[k];
    sk.seed = substream_seed(spec.seed, {rep, kSweep, k});
    const PosteriorDraws draws = run_chain(r.train, sk, methods.prior);
    const Vector p = predict_proba(draws, r.test.X, r.train.P1, ProbabilityEstimator::mean);
    SweepPoint pt;
    pt.lambda = sk.fixed_lambda;
    pt.mse = metric_mse(p, r.test.y, methods.mse);
    pt.misclass = misclassification(p, r.test.y);
    pt.kl = r.p_oracle ? metric_kl(p, *r.p_oracle, methods.kl).value
                       : std::numeric_limits<double>::quiet_NaN();
    rec.sweep.push_back(pt);
  }
  return out;
}

std::string distribution_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::assumed_uniform: return "Uniform";
    case ScenarioKind::assumed_exponential: return "Exponential";
    case ScenarioKind::assumed_bimodal:
    case ScenarioKind::semisup_bimodal: return "Bimodal";
    case ScenarioKind::semisup_unimodal: return "Unimodal";
    case ScenarioKind::two_class_gaussian: return "Gaussian";
  }
  return "unknown";
}

}  // namespace

std::string_view to_string(ScenarioKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "unknown";
}

ScenarioKind parse_scenario_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames)
    if (n == name) return k;
  throw ConfigError("unknown scenario kind '" + std::string(name) + "'");
}

bool is_assumed(ScenarioKind kind) {
  return kind == ScenarioKind::assumed_uniform || kind == ScenarioKind::assumed_exponential ||
         kind == ScenarioKind::assumed_bimodal;
}

bool is_semisup(ScenarioKind kind) {
  return kind == ScenarioKind::semisup_bimodal || kind == ScenarioKind::semisup_unimodal;
}

ScenarioSpec ScenarioSpec::semisup(ScenarioKind kind, int n_o, int n_u) {
  ScenarioSpec s;
  s.kind = kind;
  s.d = 100;
  s.tau = kind == ScenarioKind::semisup_bimodal ? 0.3 : 0.0;
  s.n_o = n_o;
  s.n_u = n_u;
  s.n = n_o + n_u;
  s.n_test = 1000;
  return s;
}

ScenarioSpec ScenarioSpec::gaussian(int d, double tau) {
  ScenarioSpec s;
  s.kind = ScenarioKind::two_class_gaussian;
  s.d = d;
  s.n = 100;
  s.n_test = 5000;
  s.tau = tau;
  return s;
}

void ScenarioSpec::validate() const {
  if (d < 1 || n < 1 || n_test < 1) throw ConfigError("d, n and n_test must be positive");
  if (replications < 1) throw ConfigError("replications must be positive");
  if (!(tau >= 0.0 && std::isfinite(tau))) throw ConfigError("tau must be non-negative");
  if (is_assumed(kind)) {
    if (!(lambda_true > 0.0 && std::isfinite(lambda_true)))
      throw ConfigError("lambda_true must be positive");
    if (!(bimodal_mean_sd > 0.0 && std::isfinite(bimodal_mean_sd)))
      throw ConfigError("bimodal_mean_sd must be positive");
    if (prior_cycles < 1) throw ConfigError("prior_cycles must be positive");
  }
  if (kind == ScenarioKind::two_class_gaussian && n % 2 != 0)
    throw ConfigError("two-class Gaussian scenario needs an even n for exact balance, got " +
                      std::to_string(n));
  if (is_semisup(kind)) {
    if (n_o < 1) throw ConfigError("semi-supervised scenarios need n_o >= 1");
    if (n_u < 0) throw ConfigError("n_u must be non-negative");
    if (n != n_o + n_u)
      throw ConfigError("semi-supervised scenarios need n = n_o + n_u (" + std::to_string(n) +
                        " vs " + std::to_string(n_o + n_u) + ")");
  }
}

double oracle_probability(const OracleModel& oracle, const Eigen::Ref<const Vector>& x) {
  if (x.size() != oracle.mu0.size() || oracle.mu1.size() != oracle.mu0.size())
    throw InvalidArgument("oracle dimension mismatch");
  const double t = (oracle.mu1 - oracle.mu0).dot(x) +
                   0.5 * (oracle.mu0.squaredNorm() - oracle.mu1.squaredNorm());
  return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
}

Vector oracle_probabilities(const OracleModel& oracle, const Matrix& X) {
  Vector p(X.cols());
  for (Eigen::Index i = 0; i < X.cols(); ++i) p[i] = oracle_probability(oracle, X.col(i));
  return p;
}

AssumedData gen_assumed(const ScenarioSpec& spec, std::uint64_t rep) {
  spec.validate();
  if (!is_assumed(spec.kind)) throw InvalidArgument("gen_assumed needs an assumed-model scenario");
  Rng rng = make_rng(spec.seed, {rep, kData});
  Vector mu0, mu1;
  if (spec.kind == ScenarioKind::assumed_bimodal) {
    mu0 = normal_vector(spec.d, spec.bimodal_mean_sd, rng);
    mu1 = normal_vector(spec.d, spec.bimodal_mean_sd, rng);
  }
  AssumedData out;
  out.train.X = draw_assumed_X(spec, spec.n, mu0, mu1, rng);
  out.test.X = draw_assumed_X(spec, spec.n_test, mu0, mu1, rng);

  SamplerConfig prior_cfg;
  prior_cfg.n_iter = spec.prior_cycles;
  prior_cfg.burn_in = spec.prior_cycles - 1;
  prior_cfg.seed = substream_seed(spec.seed, {rep, kPriorChain});
  Dataset design;
  design.X = out.train.X;
  design.y.assign(static_cast<std::size_t>(spec.n), Label::unlabeled);
  const PosteriorDraws prior_draws = sample_prior_beta(design, spec.lambda_true, 0.0, prior_cfg);
  out.beta_true = prior_draws.states.back().beta;

  out.train.y = draw_link_labels(out.train.X.transpose() * out.beta_true, 0.5, rng);
  out.test.y = draw_link_labels(out.test.X.transpose() * out.beta_true, 0.5, rng);
  return out;
}

GaussianData gen_gaussian(const ScenarioSpec& spec, std::uint64_t rep) {
  spec.validate();
  if (spec.kind != ScenarioKind::two_class_gaussian)
    throw InvalidArgument("gen_gaussian needs the two-class-gaussian scenario");
  Rng rng = make_rng(spec.seed, {rep, kData});
  GaussianData out;
  out.oracle.mu0 = normal_vector(spec.d, spec.tau, rng);
  out.oracle.mu1 = normal_vector(spec.d, spec.tau, rng);
  out.train = gaussian_block(out.oracle, spec.n, rng);
  out.test = gaussian_block(out.oracle, spec.n_test, rng);
  return out;
}

SemisupData gen_semisup(const ScenarioSpec& spec, std::uint64_t rep) {
  spec.validate();
  if (!is_semisup(spec.kind)) throw InvalidArgument("gen_semisup needs a semi-supervised scenario");
  Rng rng = make_rng(spec.seed, {rep, kData});
  SemisupData out;
  Dataset labeled, unlabeled;
  if (spec.kind == ScenarioKind::semisup_bimodal) {
    OracleModel oracle{normal_vector(spec.d, spec.tau, rng), normal_vector(spec.d, spec.tau, rng)};
    labeled = gaussian_block(oracle, spec.n_o, rng);
    unlabeled = gaussian_block(oracle, spec.n_u, rng);
    out.test = gaussian_block(oracle, spec.n_test, rng);
  } else {
    const Vector beta_sep = normal_vector(spec.d, 1.0, rng);
    constexpr std::int64_t max_redraws = 1000;
    for (;;) {
      labeled = unimodal_block(beta_sep, spec.n_o, rng);
      if (spec.n_o < 2 || labeled.has_both_classes()) break;
      if (++out.label_redraws > max_redraws)
        throw InvalidArgument("could not draw a labeled block holding both classes");
    }
    unlabeled = unimodal_block(beta_sep, spec.n_u, rng);
    out.test = unimodal_block(beta_sep, spec.n_test, rng);
  }
  std::fill(unlabeled.y.begin(), unlabeled.y.end(), Label::unlabeled);
  out.train = concat(labeled, unlabeled);
  return out;
}

void MethodConfig::validate() const {
  sampler.validate();
  prior.validate();
  if (bootstrap_B < 2) throw ConfigError("bootstrap_B must be at least 2");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must be in (0,1)");
  if (fit_lambda && !(*fit_lambda > 0.0 && std::isfinite(*fit_lambda)))
    throw ConfigError("fit_lambda must be positive");
  for (double l : lambda_sweep)
    if (!(l > 0.0 && std::isfinite(l))) throw ConfigError("lambda sweep values must be positive");
  if (sweep_cycles < 1) throw ConfigError("sweep_cycles must be positive");
  if (!(calibration_width > 0.0 && calibration_width <= 1.0))
    throw ConfigError("calibration_width must be in (0,1]");
}

std::vector<double> log_spaced(double lower, double upper, int count) {
  if (!(lower > 0.0 && upper > lower) || count < 2)
    throw InvalidArgument("log_spaced needs 0 < lower < upper and count >= 2");
  std::vector<double> out(static_cast<std::size_t>(count));
  const double a = std::log(lower), b = std::log(upper);
  for (int k = 0; k < count; ++k)
    out[static_cast<std::size_t>(k)] = std::exp(a + (b - a) * k / (count - 1));
  out.front() = lower;
  out.back() = upper;
  return out;
}

SimReport run_scenario(const ScenarioSpec& spec, const MethodConfig& methods) {
  spec.validate();
  methods.validate();
  if ((methods.clt || methods.boot) && !is_assumed(spec.kind))
    throw ConfigError("CLT and bootstrap coverage need an assumed-model scenario");
  if (is_semisup(spec.kind) && !methods.mcmc && methods.lambda_sweep.empty())
    throw ConfigError("semi-supervised scenarios are fitted by MCMC only");

  const auto reps = static_cast<std::size_t>(spec.replications);
  std::vector<ReplicationOutput> outputs(reps);
  parallel_for(reps, [&](std::size_t rep) {
    try {
      outputs[rep] = run_replication(spec, methods, rep);
    } catch (const Error& e) {
      throw Error(e.category(), "replication " + std::to_string(rep) + ": " + e.what());
    } catch (const std::exception& e) {
      throw NumericError("replication " + std::to_string(rep) + ": " + e.what());
    }
  });

  SimReport report;
  report.spec = spec;
  report.methods = methods;
  for (auto& o : outputs) {
    report.records.push_back(std::move(o.record));
    if (!o.bins_mean.empty()) merge_bins(report.calibration_mean, o.bins_mean);
    if (!o.bins_mode.empty()) merge_bins(report.calibration_mode, o.bins_mode);
  }
  return report;
}

Table1Row table1_row(const SimReport& report) {
  Table1Row row;
  row.distribution = distribution_name(report.spec.kind);
  row.n = report.spec.n;
  row.d = report.spec.d;
  row.lambda = fit_lambda_for(report.spec, report.methods);
  auto avg_cov = [&](auto pick) {
    MethodCoverage c;
    c.beta = average(report, [&](const ReplicationRecord& r) { return pick(r).beta; });
    c.u = average(report, [&](const ReplicationRecord& r) { return pick(r).u; });
    c.width_beta = average(report, [&](const ReplicationRecord& r) { return pick(r).width_beta; });
    c.width_u = average(report, [&](const ReplicationRecord& r) { return pick(r).width_u; });
    return c;
  };
  row.mcmc = avg_cov([](const ReplicationRecord& r) -> const MethodCoverage& { return r.mcmc; });
  row.clt = avg_cov([](const ReplicationRecord& r) -> const MethodCoverage& { return r.clt; });
  row.boot = avg_cov([](const ReplicationRecord& r) -> const MethodCoverage& { return r.boot; });
  row.replications = static_cast<int>(report.records.size());
  return row;
}

Table2Row table2_row(const SimReport& report) {
  Table2Row row;
  row.d = report.spec.d;
  row.tau = report.spec.tau;
  row.lambda_hat = average(report, [](const ReplicationRecord& r) { return r.lambda_mean; });
  row.kl_hat = average(report, [](const ReplicationRecord& r) { return r.kl; });
  row.mse_hat = average(report, [](const ReplicationRecord& r) { return r.mse; });
  row.misclass_hat = average(report, [](const ReplicationRecord& r) { return r.misclass; });
  row.replications = static_cast<int>(report.records.size());

  const std::size_t K = report.methods.lambda_sweep.size();
  row.lambda_kl = row.lambda_mse = row.kl_best = row.mse_best =
      std::numeric_limits<double>::quiet_NaN();
  double best_kl = std::numeric_limits<double>::infinity();
  double best_mse = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < K; ++k) {
    const double kl = average(report, [k](const ReplicationRecord& r) { return r.sweep[k].kl; });
    const double mse = average(report, [k](const ReplicationRecord& r) { return r.sweep[k].mse; });
    if (kl < best_kl) {
      best_kl = kl;
      row.lambda_kl = report.methods.lambda_sweep[k];
      row.kl_best = kl;
    }
    if (mse < best_mse) {
      best_mse = mse;
      row.lambda_mse = report.methods.lambda_sweep[k];
      row.mse_best = mse;
    }
  }
  return row;
}

Table3Row table3_row(const SimReport& report) {
  Table3Row row;
  row.scenario = distribution_name(report.spec.kind);
  row.n_o = report.spec.n_o;
  row.n_u = report.spec.n_u;
  row.misclass = average(report, [](const ReplicationRecord& r) { return r.misclass; });
  row.replications = static_cast<int>(report.records.size());
  return row;
}

}  // namespace bdwd
