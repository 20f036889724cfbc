#include "app.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <ostream>
#include <sstream>

#include "bdwd/dwd.hpp"
#include "bdwd/io.hpp"
#include "bdwd/laplace.hpp"
#include "bdwd/parallel.hpp"
#include "bdwd/rng.hpp"
#include "bdwd/sampler.hpp"
#include "bdwd/stats.hpp"
#include "bdwd/version.hpp"

namespace bdwd::app {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr std::pair<Command, std::string_view> kCommands[] = {
    {Command::fit, "fit"},           {Command::sample, "sample"},
    {Command::predict, "predict"},   {Command::laplace, "laplace"},
    {Command::bootstrap, "bootstrap"}, {Command::simulate, "simulate"},
    {Command::calibrate, "calibrate"},
};

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
  throw ConfigError("option '" + key + "': '" + value + "' is not " + what);
}

template <typename T>
T parse_value(const std::string& key, const std::string& s);

template <>
std::string parse_value<std::string>(const std::string&, const std::string& s) {
  return s;
}

template <>
double parse_value<double>(const std::string& key, const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (first == last || ec != std::errc() || ptr != last || !std::isfinite(v))
    bad_value(key, s, "a finite number");
  return v;
}

template <typename Int>
Int parse_integer(const std::string& key, const std::string& s) {
  Int v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) bad_value(key, s, "an integer");
  return v;
}

template <>
int parse_value<int>(const std::string& key, const std::string& s) {
  return parse_integer<int>(key, s);
}
template <>
std::int64_t parse_value<std::int64_t>(const std::string& key, const std::string& s) {
  return parse_integer<std::int64_t>(key, s);
}
template <>
std::uint64_t parse_value<std::uint64_t>(const std::string& key, const std::string& s) {
  return parse_integer<std::uint64_t>(key, s);
}

template <>
bool parse_value<bool>(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  bad_value(key, s, "a boolean");
}

template <>
std::vector<double> parse_value<std::vector<double>>(const std::string& key, const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(parse_value<double>(key, item));
  return out;
}

template <typename T>
struct Field {
  static json get(const T& v) { return json(v); }
};
template <typename T>
struct Field<std::optional<T>> {
  static json get(const std::optional<T>& v) { return v ? json(*v) : json(nullptr); }
};

template <typename T>
T parse_field(const std::string& key, const std::string& s, T*) {
  return parse_value<T>(key, s);
}
template <typename T>
std::optional<T> parse_field(const std::string& key, const std::string& s, std::optional<T>*) {
  return parse_value<T>(key, s);
}

template <typename T>
OptionSpec spec(std::string name, std::string help, T RunConfig::*member) {
  OptionSpec o;
  o.name = name;
  o.help = std::move(help);
  o.is_flag = std::is_same_v<T, bool>;
  o.set = [member, name](RunConfig& c, const std::string& s) {
    c.*member = parse_field(name, s, static_cast<T*>(nullptr));
  };
  o.get = [member](const RunConfig& c) { return Field<T>::get(c.*member); };
  return o;
}

std::vector<OptionSpec> build_specs() {
  std::vector<OptionSpec> v;
  OptionSpec cmd;
  cmd.name = "command";
  cmd.help = "fit | sample | predict | laplace | bootstrap | simulate | calibrate";
  cmd.set = [](RunConfig& c, const std::string& s) { c.command = parse_command(s); };
  cmd.get = [](const RunConfig& c) {
    return c.command ? json(std::string(to_string(*c.command))) : json(nullptr);
  };
  v.push_back(cmd);
  v.push_back(spec("input", "training CSV", &RunConfig::input));
  v.push_back(spec("newdata", "CSV scored by predict/laplace/bootstrap", &RunConfig::newdata));
  v.push_back(spec("fit_dir", "output directory of a previous fit or sample run", &RunConfig::fit_dir));
  v.push_back(spec("output_dir", "directory receiving results and manifest.json", &RunConfig::output_dir));
  v.push_back(spec("phi_cache", "PhiTable cache file", &RunConfig::phi_cache));
  v.push_back(spec("label_column", "name of the label column", &RunConfig::label_column));
  v.push_back(spec("zero_one_labels", "read labels 0/1 as -1/+1", &RunConfig::zero_one_labels));
  v.push_back(spec("standardize", "center and scale features", &RunConfig::standardize));
  v.push_back(spec("p1", "marginal probability of class +1", &RunConfig::p1));
  v.push_back(spec("lambda", "fixed penalty", &RunConfig::lambda));
  v.push_back(spec("infer_lambda", "sample lambda under its uniform prior", &RunConfig::infer_lambda));
  v.push_back(spec("lambda_lower", "lower bound of the lambda prior", &RunConfig::lambda_lower));
  v.push_back(spec("lambda_upper", "upper bound of the lambda prior", &RunConfig::lambda_upper));
  v.push_back(spec("phi_grid_points", "lambda grid size of the PhiTable", &RunConfig::phi_grid_points));
  v.push_back(spec("phi_mc_samples", "Monte Carlo draws per PhiTable grid point", &RunConfig::phi_mc_samples));
  v.push_back(spec("n_iter", "MCMC cycles (0: 1000 fixed, 10000 inferred lambda)", &RunConfig::n_iter));
  v.push_back(spec("burn_in", "discarded cycles (-1: 10%)", &RunConfig::burn_in));
  v.push_back(spec("thin", "keep every thin-th cycle", &RunConfig::thin));
  v.push_back(spec("initial_proposal_sd", "beta proposal sd before adaptation (0: 1/sqrt(lambda n))", &RunConfig::initial_proposal_sd));
  v.push_back(spec("beta0_proposal_sd", "beta0 proposal sd", &RunConfig::beta0_proposal_sd));
  v.push_back(spec("beta0_proposal", "random-walk | centered", &RunConfig::beta0_proposal));
  v.push_back(spec("fixed_beta0", "hold beta0 at this value", &RunConfig::fixed_beta0));
  v.push_back(spec("lambda_step_sd", "log-lambda random-walk sd", &RunConfig::lambda_step_sd));
  v.push_back(spec("infer_p1", "sample P1 under a uniform prior", &RunConfig::infer_p1));
  v.push_back(spec("refresh_every", "cycles between full score refreshes", &RunConfig::refresh_every));
  v.push_back(spec("verify_every", "cycles between incremental-score checks (0: off)", &RunConfig::verify_every));
  v.push_back(spec("tol", "mode solver tolerance", &RunConfig::tol));
  v.push_back(spec("max_iter", "mode solver iteration limit", &RunConfig::max_iter));
  v.push_back(spec("level", "interval level", &RunConfig::level));
  v.push_back(spec("bootstrap_b", "bootstrap resamples", &RunConfig::bootstrap_b));
  v.push_back(spec("joint_intercept", "Laplace covariance including beta0", &RunConfig::joint_intercept));
  v.push_back(spec("scenario", "simulation scenario kind", &RunConfig::scenario));
  v.push_back(spec("d", "simulated dimension", &RunConfig::d));
  v.push_back(spec("n", "simulated training size", &RunConfig::n));
  v.push_back(spec("n_test", "simulated test size", &RunConfig::n_test));
  v.push_back(spec("lambda_true", "penalty of the generating prior", &RunConfig::lambda_true));
  v.push_back(spec("tau", "class mean sd", &RunConfig::tau));
  v.push_back(spec("n_o", "labeled training samples", &RunConfig::n_o));
  v.push_back(spec("n_u", "unlabeled training samples", &RunConfig::n_u));
  v.push_back(spec("replications", "simulation replications", &RunConfig::replications));
  v.push_back(spec("bimodal_mean_sd", "sd of the mixture means (assumed-bimodal)", &RunConfig::bimodal_mean_sd));
  v.push_back(spec("prior_cycles", "Metropolis cycles drawing beta_true", &RunConfig::prior_cycles));
  v.push_back(spec("methods", "comma list of mcmc, clt, boot", &RunConfig::methods));
  v.push_back(spec("intercept", "pinned | free (assumed-model scenarios)", &RunConfig::intercept));
  v.push_back(spec("lambda_sweep", "comma list of fixed lambdas scored in simulate", &RunConfig::lambda_sweep));
  v.push_back(spec("sweep_cycles", "MCMC cycles per sweep fit", &RunConfig::sweep_cycles));
  v.push_back(spec("mse_orientation", "as-printed | conventional", &RunConfig::mse_orientation));
  v.push_back(spec("kl_direction", "oracle-to-estimate | estimate-to-oracle", &RunConfig::kl_direction));
  v.push_back(spec("calibration_width", "calibration bin width", &RunConfig::calibration_width));
  v.push_back(spec("folds", "cross-validation folds", &RunConfig::folds));
  v.push_back(spec("seed", "RNG seed", &RunConfig::seed));
  v.push_back(spec("threads", "worker threads (0: hardware)", &RunConfig::threads));
  return v;
}

const OptionSpec& find_spec(const std::string& key) {
  for (const auto& s : option_specs())
    if (s.name == key) return s;
  throw ConfigError("unknown configuration key '" + key + "'");
}

SamplerConfig sampler_from(const RunConfig& c) {
  SamplerConfig s = SamplerConfig::defaults(c.infer_lambda);
  if (c.n_iter > 0) s.n_iter = c.n_iter;
  s.burn_in = c.burn_in;
  s.thin = c.thin;
  s.fixed_lambda = c.lambda;
  s.seed = c.seed;
  s.initial_proposal_sd = c.initial_proposal_sd;
  s.beta0_proposal_sd = c.beta0_proposal_sd;
  s.beta0_proposal =
      c.beta0_proposal == "centered" ? Beta0Proposal::centered : Beta0Proposal::random_walk;
  s.fixed_beta0 = c.fixed_beta0;
  s.lambda_step_sd = c.lambda_step_sd;
  s.infer_p1 = c.infer_p1;
  s.refresh_every = c.refresh_every;
  s.verify_every = c.verify_every;
  return s;
}

LambdaPrior prior_from(const RunConfig& c) {
  LambdaPrior p{c.lambda_lower, c.lambda_upper};
  try {
    p.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return p;
}

PhiOptions phi_from(const RunConfig& c) {
  PhiOptions o;
  o.grid_points = c.phi_grid_points;
  o.mc_samples = c.phi_mc_samples;
  return o;
}

SolverOptions solver_from(const RunConfig& c) { return SolverOptions{c.tol, c.max_iter, c.fixed_beta0}; }

io::IngestResult ingest(const RunConfig& c, const std::string& path, bool labels_optional) {
  io::IngestOptions o;
  o.label_column = c.label_column;
  o.zero_one_labels = c.zero_one_labels;
  o.standardize = c.standardize;
  o.P1 = c.p1;
  o.labels_optional = labels_optional;
  return io::ingest_csv(path, o);
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Outcome {
  json results = json::object();
  std::vector<std::string> outputs;
  std::optional<std::string> phi_cache_key;
};

struct Context {
  const RunConfig& config;
  fs::path out;
  std::ostream& log;
  Outcome outcome;

  fs::path file(const std::string& name) {
    outcome.outputs.push_back(name);
    return out / name;
  }
};

double start_lambda(const LambdaPrior& prior) {
  return prior.contains(1.0) ? 1.0 : std::sqrt(prior.lower * prior.upper);
}

void cmd_fit(Context& ctx) {
  const auto in = ingest(ctx.config, ctx.config.input, false);
  const ModelState mode = solve_mode(in.data, ctx.config.lambda, solver_from(ctx.config));
  io::write_mode_csv(ctx.file("mode.csv"), mode);
  ctx.outcome.results["objective"] = objective(mode, in.data);
  ctx.outcome.results["n"] = in.data.size();
  ctx.outcome.results["d"] = in.data.dim();
  ctx.log << "fit: n=" << in.data.size() << " d=" << in.data.dim()
          << " objective=" << io::format_double(objective(mode, in.data)) << "\n";
}

PosteriorDraws sample_posterior(Context& ctx, const Dataset& data, SamplerConfig sc,
                                const fs::path& phi_cache, bool* cache_hit) {
  const LambdaPrior prior = prior_from(ctx.config);
  if (!sc.infer_lambda) return run_chain(data, sc, prior);
  const ModelState start = initial_mode(data, start_lambda(prior), ctx.config.fixed_beta0);
  std::string key;
  bool hit = false;
  const PhiTable table = io::cached_phi_table(phi_cache, data, prior, start.beta0,
                                              substream_seed(sc.seed, {0x9a1ULL}),
                                              phi_from(ctx.config), &key, &hit);
  if (!phi_cache.empty()) ctx.outcome.phi_cache_key = key;
  if (cache_hit) *cache_hit = hit;
  return run_chain_from(data, sc, prior, &table, start);
}

void cmd_sample(Context& ctx) {
  const auto in = ingest(ctx.config, ctx.config.input, false);
  const SamplerConfig sc = sampler_from(ctx.config);
  const fs::path cache = ctx.config.phi_cache.empty() ? ctx.out / "phi_table.json"
                                                      : fs::path(ctx.config.phi_cache);
  bool hit = false;
  const PosteriorDraws draws = sample_posterior(ctx, in.data, sc, cache, &hit);
  if (sc.infer_lambda && ctx.config.phi_cache.empty()) ctx.outcome.outputs.push_back("phi_table.json");
  io::write_draws_csv(ctx.file("draws.csv"), draws);
  io::write_diagnostics_json(ctx.file("diagnostics.json"), draws, sc);
  io::write_mode_csv(ctx.file("mode.csv"), draws.mode);
  const PosteriorSummary summary = summarize(draws, ctx.config.level, &in.data.X);
  io::write_intervals_csv(ctx.file("intervals.csv"), {to_interval_set(summary)});
  auto& r = ctx.outcome.results;
  r["retained_draws"] = draws.size();
  r["accept_beta_mean"] =
      stats::mean(std::span<const double>(draws.accept_beta.data(), draws.accept_beta.size()));
  r["accept_beta0"] = draws.accept_beta0;
  if (sc.infer_lambda) {
    r["accept_lambda"] = draws.accept_lambda;
    r["lambda_mean"] = summary.lambda->mean;
    r["phi_cache_hit"] = hit;
  }
  ctx.log << "sample: " << draws.size() << " draws retained\n";
}

void cmd_predict(Context& ctx) {
  const fs::path dir = ctx.config.fit_dir;
  const std::string path = ctx.config.newdata.empty() ? ctx.config.input : ctx.config.newdata;
  const auto in = ingest(ctx.config, path, true);
  const ModelState mode = io::read_mode_csv(dir / "mode.csv");
  if (mode.beta.size() != in.data.dim())
    throw InvalidArgument("model dimension " + std::to_string(mode.beta.size()) +
                          " does not match the data dimension " + std::to_string(in.data.dim()));
  PosteriorDraws draws;
  const bool have_draws = fs::exists(dir / "draws.csv");
  if (have_draws)
    draws = io::read_draws_csv(dir / "draws.csv");
  else
    draws.states = {mode};
  draws.mode = mode;
  const double P1 = ctx.config.p1;
  const Vector p_mean = predict_proba(draws, in.data.X, P1, ProbabilityEstimator::mean);
  const Vector p_mode = predict_proba(draws, in.data.X, P1, ProbabilityEstimator::mode);
  io::write_probabilities_csv(ctx.file("probabilities.csv"), p_mean, p_mode);
  ctx.outcome.results["posterior_draws"] = have_draws ? draws.size() : 0;
  if (in.data.count_labeled() > 0)
    ctx.outcome.results["misclassification"] = misclassification(p_mean, in.data.y);
  ctx.log << "predict: " << in.data.size() << " samples scored\n";
}

void cmd_laplace(Context& ctx) {
  const auto in = ingest(ctx.config, ctx.config.input, false);
  LaplaceOptions opts;
  opts.joint_intercept = ctx.config.joint_intercept;
  const ModelState mode = solve_mode(in.data, ctx.config.lambda, solver_from(ctx.config));
  const LaplaceApprox approx = laplace_from_mode(in.data, mode, opts);
  Matrix scoreX = in.data.X;
  if (!ctx.config.newdata.empty()) scoreX = ingest(ctx.config, ctx.config.newdata, true).data.X;
  io::write_intervals_csv(ctx.file("intervals.csv"),
                          {laplace_intervals(approx, ctx.config.level, &scoreX)});
  io::write_mode_csv(ctx.file("mode.csv"), approx.mode);
  ctx.outcome.results["active_set_size"] = approx.active_set.size();
  ctx.log << "laplace: " << approx.active_set.size() << " active samples\n";
}

void cmd_bootstrap(Context& ctx) {
  const auto in = ingest(ctx.config, ctx.config.input, false);
  Matrix scoreX = in.data.X;
  if (!ctx.config.newdata.empty()) scoreX = ingest(ctx.config, ctx.config.newdata, true).data.X;
  const BootstrapResult boot = bootstrap_intervals(in.data, ctx.config.lambda, ctx.config.bootstrap_b,
                                                   ctx.config.level, ctx.config.seed, &scoreX,
                                                   ctx.config.fixed_beta0);
  io::write_intervals_csv(ctx.file("intervals.csv"), {boot.intervals});
  ctx.outcome.results["redraws"] = boot.redraws;
  ctx.log << "bootstrap: " << ctx.config.bootstrap_b << " resamples, " << boot.redraws
          << " single-class redraws\n";
}

void cmd_simulate(Context& ctx) {
  const ScenarioSpec spec = scenario_from(ctx.config);
  const MethodConfig methods = methods_from(ctx.config);
  const SimReport report = run_scenario(spec, methods);
  io::write_sim_records_csv(ctx.file("records.csv"), report);
  auto& r = ctx.outcome.results;
  if (is_assumed(spec.kind)) {
    const Table1Row row = table1_row(report);
    io::write_table1_csv(ctx.file("table1.csv"), {row});
    r["mcmc_beta"] = row.mcmc.beta;
    r["mcmc_u"] = row.mcmc.u;
  } else if (spec.kind == ScenarioKind::two_class_gaussian) {
    const Table2Row row = table2_row(report);
    io::write_table2_csv(ctx.file("table2.csv"), {row});
    r["lambda_hat"] = row.lambda_hat;
  } else {
    const Table3Row row = table3_row(report);
    io::write_table3_csv(ctx.file("table3.csv"), {row});
    r["misclassification"] = row.misclass;
  }
  if (methods.mcmc)
    io::write_calibration_csv(ctx.file("calibration.csv"),
                              {{"mean", report.calibration_mean}, {"mode", report.calibration_mode}});
  ctx.log << "simulate: " << to_string(spec.kind) << ", " << report.records.size()
          << " replications\n";
}

void cmd_calibrate(Context& ctx) {
  const auto in = ingest(ctx.config, ctx.config.input, false);
  const Dataset& data = in.data;
  const int K = ctx.config.folds;
  std::vector<Eigen::Index> labeled;
  for (Eigen::Index i = 0; i < data.size(); ++i)
    if (is_labeled(data.y[static_cast<std::size_t>(i)])) labeled.push_back(i);
  if (static_cast<int>(labeled.size()) < K)
    throw InvalidArgument("calibration needs at least " + std::to_string(K) + " labeled samples");
  Rng rng = make_rng(ctx.config.seed, {0xf01dULL});
  for (std::size_t i = labeled.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(labeled[i - 1], labeled[pick(rng)]);
  }
  std::vector<int> fold(static_cast<std::size_t>(data.size()), -1);
  for (std::size_t k = 0; k < labeled.size(); ++k)
    fold[static_cast<std::size_t>(labeled[k])] = static_cast<int>(k % static_cast<std::size_t>(K));

  Vector p_mean = Vector::Constant(data.size(), std::nan("")), p_mode = p_mean;
  parallel_for(static_cast<std::size_t>(K), [&](std::size_t k) {
    std::vector<Eigen::Index> train_idx, test_idx;
    for (Eigen::Index i = 0; i < data.size(); ++i)
      (fold[static_cast<std::size_t>(i)] == static_cast<int>(k) ? test_idx : train_idx).push_back(i);
    const Dataset train = data.subset(train_idx);
    const Dataset test = data.subset(test_idx);
    SamplerConfig sc = sampler_from(ctx.config);
    sc.seed = substream_seed(ctx.config.seed, {k});
    const PosteriorDraws draws = sample_posterior(ctx, train, sc, fs::path(), nullptr);
    const Vector pm = predict_proba(draws, test.X, data.P1, ProbabilityEstimator::mean);
    const Vector po = predict_proba(draws, test.X, data.P1, ProbabilityEstimator::mode);
    for (std::size_t t = 0; t < test_idx.size(); ++t) {
      p_mean[test_idx[t]] = pm[static_cast<Eigen::Index>(t)];
      p_mode[test_idx[t]] = po[static_cast<Eigen::Index>(t)];
    }
  });

  std::sort(labeled.begin(), labeled.end());
  Vector pm(static_cast<Eigen::Index>(labeled.size())), po(pm.size());
  std::vector<Label> y;
  std::vector<std::int64_t> ids;
  for (std::size_t k = 0; k < labeled.size(); ++k) {
    pm[static_cast<Eigen::Index>(k)] = p_mean[labeled[k]];
    po[static_cast<Eigen::Index>(k)] = p_mode[labeled[k]];
    y.push_back(data.y[static_cast<std::size_t>(labeled[k])]);
    ids.push_back(labeled[k] + 1);
  }
  io::write_probabilities_csv(ctx.file("probabilities.csv"), pm, po, ids);
  const double w = ctx.config.calibration_width;
  io::write_calibration_csv(ctx.file("calibration.csv"),
                            {{"mean", calibration_bins(pm, y, w)}, {"mode", calibration_bins(po, y, w)}});
  const MseOrientation orient = methods_from(ctx.config).mse;
  const double mis_mean = misclassification(pm, y), mis_mode = misclassification(po, y);
  const double mse_mean = metric_mse(pm, y, orient), mse_mode = metric_mse(po, y, orient);
  io::write_text(ctx.file("cv_summary.csv"),
                 "estimator,misclassification,mse,n,folds\nmean," + io::format_double(mis_mean) +
                     "," + io::format_double(mse_mean) + "," + std::to_string(y.size()) + "," +
                     std::to_string(K) + "\nmode," + io::format_double(mis_mode) + "," +
                     io::format_double(mse_mode) + "," + std::to_string(y.size()) + "," +
                     std::to_string(K) + "\n");
  ctx.outcome.results["misclassification_mean"] = mis_mean;
  ctx.outcome.results["misclassification_mode"] = mis_mode;
  ctx.log << "calibrate: " << K << "-fold CV over " << y.size() << " labeled samples\n";
}

}  // namespace

std::string_view to_string(Command command) {
  for (const auto& [c, name] : kCommands)
    if (c == command) return name;
  return "unknown";
}

Command parse_command(std::string_view name) {
  for (const auto& [c, n] : kCommands)
    if (n == name) return c;
  throw ConfigError("unknown command '" + std::string(name) + "'");
}

const std::vector<OptionSpec>& option_specs() {
  static const std::vector<OptionSpec> specs = build_specs();
  return specs;
}

void apply_option(RunConfig& config, const std::string& key, const std::string& value) {
  find_spec(key).set(config, value);
  config.explicitly_set.insert(key);
}

void apply_json_config(RunConfig& config, const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  for (const auto& [key, value] : j.items()) {
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_boolean()) {
      text = value.get<bool>() ? "true" : "false";
    } else if (value.is_number()) {
      text = value.dump();
    } else if (value.is_array()) {
      for (const auto& e : value) {
        if (!e.is_number()) throw ConfigError("config key '" + key + "' must list numbers");
        text += (text.empty() ? "" : ",") + e.dump();
      }
    } else {
      throw ConfigError("config key '" + key + "' has an unsupported value type");
    }
    apply_option(config, key, text);
  }
}

json config_to_json(const RunConfig& config) {
  json j;
  for (const auto& s : option_specs()) j[s.name] = s.get(config);
  return j;
}

void RunConfig::validate() const {
  if (!command) throw ConfigError("no command given");
  const Command c = *command;
  const bool needs_input = c == Command::fit || c == Command::sample || c == Command::laplace ||
                           c == Command::bootstrap || c == Command::calibrate;
  if (needs_input && input.empty())
    throw ConfigError(std::string(to_string(c)) + " requires --input");
  if (c == Command::predict) {
    if (fit_dir.empty()) throw ConfigError("predict requires --fit-dir from a fit or sample run");
    if (newdata.empty() && input.empty()) throw ConfigError("predict requires --newdata");
  }
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  if (!(p1 > 0.0 && p1 < 1.0)) throw ConfigError("p1 must be in (0,1)");
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must be in (0,1)");
  if (n_iter < 0) throw ConfigError("n_iter must be non-negative");
  if (folds < 2) throw ConfigError("folds must be at least 2");
  if (threads < 0) throw ConfigError("threads must be non-negative");
  if (phi_grid_points < 2 || phi_mc_samples < 1)
    throw ConfigError("phi_grid_points must be >= 2 and phi_mc_samples >= 1");
  if (!(tol > 0.0) || max_iter < 1) throw ConfigError("tol and max_iter must be positive");
  if (infer_lambda && (c == Command::fit || c == Command::laplace || c == Command::bootstrap))
    throw ConfigError(std::string(to_string(c)) + " needs a fixed lambda");
  if (mse_orientation != "as-printed" && mse_orientation != "conventional")
    throw ConfigError("mse_orientation must be as-printed or conventional");
  if (kl_direction != "oracle-to-estimate" && kl_direction != "estimate-to-oracle")
    throw ConfigError("kl_direction must be oracle-to-estimate or estimate-to-oracle");
  if (beta0_proposal != "random-walk" && beta0_proposal != "centered")
    throw ConfigError("beta0_proposal must be random-walk or centered");
  if (intercept != "pinned" && intercept != "free")
    throw ConfigError("intercept must be pinned or free");
  prior_from(*this);
  sampler_from(*this).validate();
}

ScenarioSpec scenario_from(const RunConfig& c) {
  const ScenarioKind kind = parse_scenario_kind(c.scenario);
  ScenarioSpec s;
  if (is_semisup(kind))
    s = ScenarioSpec::semisup(kind, c.n_o, c.n_u);
  else if (kind == ScenarioKind::two_class_gaussian)
    s = ScenarioSpec::gaussian(c.d.value_or(10), c.tau.value_or(0.0));
  s.kind = kind;
  if (c.d) s.d = *c.d;
  if (c.n) s.n = *c.n;
  if (c.n_test) s.n_test = *c.n_test;
  if (c.tau) s.tau = *c.tau;
  s.lambda_true = c.lambda_true;
  s.n_o = c.n_o;
  s.n_u = c.n_u;
  s.replications = c.replications;
  s.seed = c.seed;
  s.bimodal_mean_sd = c.bimodal_mean_sd;
  s.prior_cycles = c.prior_cycles;
  s.validate();
  return s;
}

MethodConfig methods_from(const RunConfig& c) {
  MethodConfig m;
  m.mcmc = m.clt = m.boot = false;
  std::stringstream ss(c.methods);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "mcmc") m.mcmc = true;
    else if (item == "clt") m.clt = true;
    else if (item == "boot") m.boot = true;
    else if (!item.empty()) throw ConfigError("unknown method '" + item + "'");
  }
  m.sampler = sampler_from(c);
  m.prior = prior_from(c);
  m.phi = phi_from(c);
  m.bootstrap_B = c.bootstrap_b;
  m.level = c.level;
  if (c.explicitly_set.count("lambda")) m.fit_lambda = c.lambda;
  m.pin_true_intercept = c.intercept == "pinned";
  m.lambda_sweep = c.lambda_sweep;
  m.sweep_cycles = c.sweep_cycles;
  m.mse = c.mse_orientation == "conventional" ? MseOrientation::conventional
                                              : MseOrientation::as_printed;
  m.kl = c.kl_direction == "estimate-to-oracle" ? KlDirection::estimate_to_oracle
                                                : KlDirection::oracle_to_estimate;
  m.calibration_width = c.calibration_width;
  m.validate();
  return m;
}

void run(const RunConfig& config, std::ostream& log) {
  config.validate();
  if (config.threads > 0) worker_threads() = static_cast<std::size_t>(config.threads);
  const auto t0 = std::chrono::steady_clock::now();
  const std::string started = utc_now();
  Context ctx{config, fs::path(config.output_dir), log, {}};
  fs::create_directories(ctx.out);

  switch (*config.command) {
    case Command::fit: cmd_fit(ctx); break;
    case Command::sample: cmd_sample(ctx); break;
    case Command::predict: cmd_predict(ctx); break;
    case Command::laplace: cmd_laplace(ctx); break;
    case Command::bootstrap: cmd_bootstrap(ctx); break;
    case Command::simulate: cmd_simulate(ctx); break;
    case Command::calibrate: cmd_calibrate(ctx); break;
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json m;
  m["tool"] = "bdwd";
  m["version"] = kVersion;
  m["command"] = std::string(to_string(*config.command));
  m["seed"] = config.seed;
  m["started_at"] = started;
  m["wall_time_seconds"] = wall;
  m["phi_cache_key"] = ctx.outcome.phi_cache_key ? json(*ctx.outcome.phi_cache_key) : json(nullptr);
  m["outputs"] = ctx.outcome.outputs;
  m["results"] = ctx.outcome.results;
  m["config"] = config_to_json(config);
  io::write_text(ctx.out / "manifest.json", m.dump(2) + "\n");
}

int exit_code(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::config: return 2;
    case ErrorCategory::data: return 3;
    case ErrorCategory::numeric: return 4;
    case ErrorCategory::resource: return 5;
  }
  return 1;
}

std::string error_json(ErrorCategory category, const std::string& message) {
  json j;
  j["error"] = {{"category", std::string(to_string(category))}, {"message", message}};
  return j.dump();
}

}  // namespace bdwd::app
