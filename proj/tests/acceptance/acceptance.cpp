// Acceptance runner: one [PASS]/[FAIL] line per criterion. Pass criterion
// numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "app.hpp"
#include "bdwd/dwd.hpp"
#include "bdwd/io.hpp"
#include "bdwd/laplace.hpp"
#include "bdwd/metrics.hpp"
#include "bdwd/model.hpp"
#include "bdwd/sampler.hpp"
#include "bdwd/simlab.hpp"
#include "bdwd/stats.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace bdwd;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::vector<oracle::real> flatten(const ModelState& s) {
  std::vector<oracle::real> v{s.beta0};
  for (Eigen::Index j = 0; j < s.beta.size(); ++j) v.push_back(s.beta[j]);
  return v;
}

// Mode against a grid-plus-refinement minimum of the objective over (beta0, beta).
Outcome mode_vs_oracle() {
  std::mt19937_64 rng(101);
  const double lambdas[] = {0.1, 1.0, 10.0};
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const double lambda = lambdas[k % 3];
    const Dataset data = oracle::random_dataset(rng, 2, 10, 0.5);
    auto f = [&](const std::vector<oracle::real>& x) {
      return oracle::objective(data, {x[1], x[2]}, x[0], lambda);
    };
    const oracle::real best = oracle::grid_then_pattern_min(f, 3, -3.0L, 3.0L, 0.05L);
    const ModelState mode = solve_mode(data, lambda);
    const oracle::real mine = f(flatten(mode));
    worst = std::max(worst, static_cast<double>(std::fabs(mine - best)));
  }
  return {worst <= 1e-6, "max |psi(mode) - psi(oracle)| = " + fmt("%.3g", worst)};
}

Outcome posterior_mode_identity() {
  std::mt19937_64 rng(202);
  double worst_identity = 0.0, worst_excess = -INFINITY;
  for (int k = 0; k < 20; ++k) {
    const double lambda = std::pow(10.0, (k % 5) - 2.0);
    const Dataset data = oracle::random_dataset(rng, 3, 20, 0.7);
    ModelState mode = solve_mode(data, lambda);
    const double n = static_cast<double>(data.size());
    worst_identity = std::max(worst_identity,
                              std::fabs(log_posterior(mode, data) + n * objective(mode, data)));
    SamplerConfig cfg;
    cfg.fixed_lambda = lambda;
    cfg.seed = 7 + static_cast<std::uint64_t>(k);
    const PosteriorDraws draws = run_chain_from(data, cfg, {}, nullptr, mode);
    const double top = log_posterior(mode, data);
    for (const auto& s : draws.states)
      worst_excess = std::max(worst_excess, log_posterior(s, data) - top);
  }
  return {worst_identity <= 1e-9 && worst_excess <= 1e-9,
          "max identity gap " + fmt("%.3g", worst_identity) + ", max draw excess " +
              fmt("%.3g", worst_excess)};
}

SimReport table1_report() {
  static std::optional<SimReport> cached;
  if (!cached) {
    ScenarioSpec spec;
    spec.kind = ScenarioKind::assumed_uniform;
    spec.replications = 100;
    spec.seed = 2024;
    MethodConfig methods;
    methods.clt = true;
    methods.boot = true;
    cached = run_scenario(spec, methods);
  }
  return *cached;
}

Outcome mcmc_coverage() {
  const Table1Row row = table1_row(table1_report());
  const bool pass = row.mcmc.beta >= 0.90 && row.mcmc.beta <= 0.99 && row.mcmc.u >= 0.90 &&
                    row.mcmc.u <= 0.99;
  return {pass, "beta " + fmt("%.3f", row.mcmc.beta) + ", u " + fmt("%.3f", row.mcmc.u)};
}

Outcome clt_boot_coverage() {
  const Table1Row row = table1_row(table1_report());
  const bool pass = row.clt.beta >= 0.90 && row.clt.beta <= 0.99 && row.boot.beta < 0.80 &&
                    row.boot.width_beta < row.mcmc.width_beta;
  return {pass, "clt beta " + fmt("%.3f", row.clt.beta) + ", boot beta " +
                    fmt("%.3f", row.boot.beta) + ", width boot " + fmt("%.4f", row.boot.width_beta) +
                    " vs mcmc " + fmt("%.4f", row.mcmc.width_beta)};
}

Outcome laplace_hessian() {
  std::mt19937_64 rng(505);
  double worst = 0.0;
  int accepted = 0, tries = 0;
  while (accepted < 20 && tries < 2000) {
    ++tries;
    const Dataset data = oracle::random_dataset(rng, 3, 20, 1.0);
    const double lambda = 0.5;
    const ModelState mode = solve_mode(data, lambda);
    const Scores sc = scores(mode, data);
    if ((sc.signed_u.array() - 0.5).abs().minCoeff() <= 0.05) continue;
    ++accepted;
    const Matrix P = laplace_precision(data, mode);
    auto negpost = [&](const std::vector<oracle::real>& b) {
      return -oracle::log_posterior(data, b, mode.beta0, lambda);
    };
    const auto H = oracle::fd_hessian(negpost, oracle::widen(mode.beta), 1e-4L);
    for (Eigen::Index a = 0; a < P.rows(); ++a)
      for (Eigen::Index b = 0; b < P.cols(); ++b) {
        const double h = static_cast<double>(H[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]);
        worst = std::max(worst, std::fabs(P(a, b) - h) / std::fabs(h));
      }
  }
  return {accepted == 20 && worst < 1e-3,
          std::to_string(accepted) + " instances, max relative error " + fmt("%.3g", worst)};
}

Outcome calibration() {
  ScenarioSpec spec;
  spec.kind = ScenarioKind::assumed_uniform;
  spec.replications = 50;
  spec.seed = 606;
  const SimReport report = run_scenario(spec, MethodConfig{});
  double worst = 0.0;
  int bins = 0;
  for (const auto& b : report.calibration_mean) {
    if (b.count < 200) continue;
    ++bins;
    worst = std::max(worst, std::fabs(b.proportion() - b.midpoint()));
  }
  return {bins > 0 && worst < 0.05,
          std::to_string(bins) + " bins with >= 200 points, max deviation " + fmt("%.4f", worst)};
}

Outcome lambda_direction() {
  MethodConfig methods;
  methods.sampler = SamplerConfig::defaults(true);
  auto lambda_hat = [&](double tau) {
    ScenarioSpec spec = ScenarioSpec::gaussian(10, tau);
    spec.replications = 10;
    spec.seed = 707;
    const SimReport r = run_scenario(spec, methods);
    return average(r, [](const ReplicationRecord& x) { return x.lambda_mean; });
  };
  const double at0 = lambda_hat(0.0);
  const double at05 = lambda_hat(0.5);
  return {at0 > 10.0 && at05 < 1.0,
          "lambda_hat tau=0: " + fmt("%.3f", at0) + ", tau=0.5: " + fmt("%.3f", at05)};
}

Outcome semisup_gain() {
  auto misclass = [](ScenarioKind kind, int n_u) {
    ScenarioSpec spec = ScenarioSpec::semisup(kind, 10, n_u);
    spec.replications = 20;
    spec.seed = 808;
    return table3_row(run_scenario(spec, MethodConfig{})).misclass;
  };
  const double b0 = misclass(ScenarioKind::semisup_bimodal, 0);
  const double b1 = misclass(ScenarioKind::semisup_bimodal, 1000);
  const double u0 = misclass(ScenarioKind::semisup_unimodal, 0);
  const double u1 = misclass(ScenarioKind::semisup_unimodal, 1000);
  return {b1 < 0.5 * b0 && std::fabs(u1 - u0) <= 0.05,
          "bimodal " + fmt("%.3f", b0) + " -> " + fmt("%.3f", b1) + ", unimodal " +
              fmt("%.3f", u0) + " -> " + fmt("%.3f", u1)};
}

Outcome properness() {
  std::mt19937_64 rng(909);
  double worst = 0.0;
  bool finite = true;
  for (int k = 0; k < 5; ++k) {
    // Both classes stay labeled; the last instance adds one unlabeled sample.
    const int n = k == 4 ? 3 : 2 + k % 2;
    const Dataset data = oracle::random_dataset(rng, 1, n, 0.3, k == 4 ? 1 : 0);
    const double lambda = 0.5 + k;
    ModelState s = ModelState::zeros(1, lambda);
    auto post = [&](double L) {
      return oracle::integrate(
          [&](double b0) {
            return oracle::integrate(
                [&](double b) {
                  s.beta[0] = b;
                  s.beta0 = b0;
                  return std::exp(log_posterior(s, data));
                },
                -L, L, 2.0);
          },
          -L, L, 2.0);
    };
    auto prior = [&](double L) {
      return oracle::integrate(
          [&](double b) {
            s.beta[0] = b;
            s.beta0 = 0.0;
            return std::exp(log_prior_beta(s, data));
          },
          -L, L, 2.0);
    };
    for (auto [a, b] : {std::pair{post(50), post(100)}, std::pair{prior(50), prior(100)}}) {
      finite = finite && std::isfinite(a) && std::isfinite(b) && a > 0.0;
      worst = std::max(worst, std::fabs(b - a) / a);
    }
  }
  return {finite && worst < 1e-3, "max relative change on box doubling " + fmt("%.3g", worst)};
}

Outcome sampler_ks() {
  std::mt19937_64 rng(1010);
  const Dataset data = oracle::random_dataset(rng, 1, 20, 0.4);
  const double lambda = 1.0;
  SamplerConfig cfg;
  cfg.n_iter = 11000;
  cfg.burn_in = 1000;
  cfg.fixed_lambda = lambda;
  cfg.seed = 11;
  const PosteriorDraws draws = run_chain(data, cfg);
  std::vector<double> beta;
  for (const auto& st : draws.states) beta.push_back(st.beta[0]);

  // Marginal density of beta on a fine grid, integrating beta0 out numerically.
  const double c = draws.mode.beta[0], c0 = draws.mode.beta0;
  const double half = 10.0 / std::sqrt(lambda * static_cast<double>(data.size()));
  const int m = 4000;
  std::vector<double> grid(m + 1), dens(m + 1), cdf(m + 1, 0.0);
  const oracle::real top = oracle::log_posterior(data, {c}, c0, lambda);
  for (int i = 0; i <= m; ++i) {
    grid[i] = c - half + 2.0 * half * i / m;
    dens[i] = oracle::integrate(
        [&](double b0) {
          return static_cast<double>(
              std::exp(oracle::log_posterior(data, {grid[i]}, b0, lambda) - top));
        },
        c0 - 40.0, c0 + 40.0, 1.0);
  }
  for (int i = 1; i <= m; ++i) cdf[i] = cdf[i - 1] + 0.5 * (dens[i] + dens[i - 1]) * (grid[i] - grid[i - 1]);
  for (double& v : cdf) v /= cdf[m];
  auto F = [&](double x) {
    if (x <= grid.front()) return 0.0;
    if (x >= grid.back()) return 1.0;
    const auto it = std::upper_bound(grid.begin(), grid.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - grid.begin());
    const double t = (x - grid[i - 1]) / (grid[i] - grid[i - 1]);
    return cdf[i - 1] + t * (cdf[i] - cdf[i - 1]);
  };
  const double ks = stats::ks_distance(beta, F);
  return {beta.size() == 10000 && ks < 0.05,
          std::to_string(beta.size()) + " draws, KS " + fmt("%.4f", ks)};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string text = io::read_text(e.path());
    if (e.path().filename() == "manifest.json") {
      auto j = nlohmann::ordered_json::parse(text);
      j.erase("started_at");
      j.erase("wall_time_seconds");
      text = j.dump();
    }
    out[fs::relative(e.path(), dir).string()] = std::move(text);
  }
  return out;
}

Outcome reproducibility() {
  const fs::path root = fs::temp_directory_path() / "bdwd_acceptance_repro";
  fs::remove_all(root);
  fs::create_directories(root);
  ScenarioSpec spec;
  spec.d = 4;
  spec.n = 40;
  spec.n_test = 50;
  const AssumedData gen = gen_assumed(spec, 0);
  io::write_dataset_csv(root / "train.csv", gen.train);
  io::write_dataset_csv(root / "test.csv", gen.test);

  auto base = [&](const char* command) {
    app::RunConfig c;
    app::apply_option(c, "command", command);
    c.input = (root / "train.csv").string();
    c.seed = 99;
    return c;
  };
  std::vector<std::pair<std::string, app::RunConfig>> runs;
  {
    auto c = base("fit");
    runs.emplace_back("fit", c);
  }
  {
    auto c = base("sample");
    c.infer_lambda = true;
    c.n_iter = 600;
    c.phi_mc_samples = 100;
    c.phi_grid_points = 9;
    runs.emplace_back("sample", c);
  }
  {
    auto c = base("predict");
    c.newdata = (root / "test.csv").string();
    c.fit_dir = (root / "sample").string();
    runs.emplace_back("predict", c);
  }
  {
    auto c = base("laplace");
    c.newdata = (root / "test.csv").string();
    runs.emplace_back("laplace", c);
  }
  {
    auto c = base("bootstrap");
    c.bootstrap_b = 30;
    runs.emplace_back("bootstrap", c);
  }
  {
    auto c = base("simulate");
    c.d = 4;
    c.n = 30;
    c.n_test = 50;
    c.replications = 2;
    c.methods = "mcmc,clt,boot";
    c.bootstrap_b = 20;
    runs.emplace_back("simulate", c);
  }
  {
    auto c = base("calibrate");
    c.folds = 3;
    runs.emplace_back("calibrate", c);
  }

  std::ostringstream log;
  std::vector<std::string> differing;
  for (auto& [name, c] : runs) {
    const fs::path out = root / name;
    c.output_dir = out.string();
    fs::remove_all(out);
    app::run(c, log);
    const auto first = snapshot(out);
    fs::remove_all(out);
    app::run(c, log);
    if (snapshot(out) != first) differing.push_back(name);
  }
  std::string detail = std::to_string(runs.size()) + " commands";
  for (const auto& d : differing) detail += ", differs: " + d;
  fs::remove_all(root);
  return {differing.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"mode matches grid oracle", mode_vs_oracle},
      {"posterior mode identity", posterior_mode_identity},
      {"MCMC coverage (uniform, n=100, d=20)", mcmc_coverage},
      {"CLT and bootstrap coverage", clt_boot_coverage},
      {"Laplace precision equals Hessian", laplace_hessian},
      {"calibration of posterior-mean probabilities", calibration},
      {"lambda inference direction", lambda_direction},
      {"semi-supervised gain", semisup_gain},
      {"properness of posterior and prior", properness},
      {"sampler matches quadrature density", sampler_ks},
      {"reproducibility of every command", reproducibility},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.pass;
    std::printf("[%s] %d %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id,
                criteria[k].first.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
