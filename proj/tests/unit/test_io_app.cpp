#include <doctest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "app.hpp"
#include "bdwd/error.hpp"
#include "bdwd/io.hpp"
#include "bdwd/sampler.hpp"
#include "oracles.hpp"

using namespace bdwd;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "bdwd_unit" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

app::RunConfig config_for(app::Command c, const fs::path& out) {
  app::RunConfig cfg;
  cfg.command = c;
  cfg.output_dir = out.string();
  return cfg;
}

}  // namespace

TEST_CASE("csv ingestion") {
  const io::IngestResult two = io::parse_csv("a,y\n-1.5,-1\n2,1\n");
  CHECK(two.data.size() == 2);
  CHECK(two.data.dim() == 1);
  CHECK(two.data.X(0, 0) == -1.5);
  CHECK(two.data.y[1] == Label::positive);

  const io::IngestResult mixed = io::parse_csv("y,a,b\n1,0,1\nNA,2,3\n,4,5\n+1,6,7\n");
  CHECK(mixed.data.count_labeled() == 2);
  CHECK(mixed.data.count_unlabeled() == 2);
  CHECK(mixed.feature_names == std::vector<std::string>{"a", "b"});

  io::IngestOptions zo;
  zo.zero_one_labels = true;
  CHECK(io::parse_csv("x,y\n1,0\n2,1\n", zo).data.y[0] == Label::negative);

  CHECK_THROWS_AS(io::parse_csv("x,y\nfoo,1\n"), InvalidArgument);
  CHECK_THROWS_AS(io::parse_csv("x,y\n1,1\n2\n"), InvalidArgument);
  CHECK_THROWS_AS(io::parse_csv("x,y\n1,2\n"), InvalidArgument);
  try {
    io::parse_csv("x,z,y\n1,2,1\n3,bad,-1\n");
    FAIL("expected an error");
  } catch (const InvalidArgument& e) {
    const std::string what = e.what();
    CHECK(what.find("3") != std::string::npos);
    CHECK(what.find("2") != std::string::npos);
  }
}

TEST_CASE("standardization") {
  io::IngestOptions opt;
  opt.standardize = true;
  const io::IngestResult r = io::parse_csv("a,b,y\n1,5,1\n2,5,-1\n3,5,1\n", opt);
  CHECK(r.data.X.row(0).mean() == doctest::Approx(0.0));
  CHECK(r.data.X(0, 2) == doctest::Approx(1.0));
  CHECK(r.data.X.row(1).cwiseAbs().maxCoeff() == 0.0);
  CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("dataset and draws round trips") {
  const fs::path dir = scratch("roundtrip");
  std::mt19937_64 rng(61);
  const Dataset data = oracle::random_dataset(rng, 3, 9, 0.5, 2);
  io::write_dataset_csv(dir / "d.csv", data);
  const Dataset back = io::ingest_csv(dir / "d.csv").data;
  CHECK(back.X == data.X);
  CHECK(back.y == data.y);

  SamplerConfig c;
  c.n_iter = 50;
  const PosteriorDraws d = run_chain(data, c);
  io::write_draws_csv(dir / "draws.csv", d);
  const PosteriorDraws e = io::read_draws_csv(dir / "draws.csv");
  REQUIRE(e.size() == d.size());
  for (std::size_t t = 0; t < d.size(); ++t) {
    CHECK(e.states[t].beta == d.states[t].beta);
    CHECK(e.states[t].beta0 == d.states[t].beta0);
    CHECK(e.log_post[t] == d.log_post[t]);
  }
  io::write_mode_csv(dir / "mode.csv", d.mode);
  const ModelState m = io::read_mode_csv(dir / "mode.csv");
  CHECK(m.beta == d.mode.beta);
  CHECK(m.beta0 == d.mode.beta0);
}

TEST_CASE("phi table json and cache") {
  PhiTable t;
  t.lambda_grid = {0.5, 1.0, 2.0};
  t.log_phi = {0.1, -0.2, -0.9};
  t.mc_samples = 10;
  t.seed = 4;
  t.beta0_ref = 0.25;
  std::string key;
  const PhiTable back = io::phi_table_from_json(io::phi_table_to_json(t, "abc"), &key);
  CHECK(key == "abc");
  CHECK(back.log_phi == t.log_phi);
  CHECK(back.beta0_ref == 0.25);
  CHECK_THROWS_AS(io::phi_table_from_json("{\"version\": 99}"), ConfigError);

  const fs::path dir = scratch("phi");
  std::mt19937_64 rng(62);
  const Dataset data = oracle::random_dataset(rng, 2, 8);
  PhiOptions opt;
  opt.grid_points = 3;
  opt.mc_samples = 20;
  bool hit = true;
  io::cached_phi_table(dir / "phi.json", data, {}, 0.0, 1, opt, &key, &hit);
  CHECK_FALSE(hit);
  const PhiTable cached = io::cached_phi_table(dir / "phi.json", data, {}, 0.0, 1, opt, &key, &hit);
  CHECK(hit);
  io::cached_phi_table(dir / "phi.json", data, {}, 0.0, 2, opt, &key, &hit);
  CHECK_FALSE(hit);
  CHECK(io::phi_cache_key(data, 0.0, {}, opt, 1) != io::phi_cache_key(data, 0.1, {}, opt, 1));
  CHECK(cached.log_phi.size() == 3);
}

TEST_CASE("configuration options") {
  app::RunConfig c;
  app::apply_option(c, "command", "fit");
  app::apply_option(c, "lambda", "0.25");
  app::apply_option(c, "fixed_beta0", "0.5");
  app::apply_option(c, "standardize", "true");
  CHECK(c.command == app::Command::fit);
  CHECK(c.lambda == 0.25);
  CHECK(c.fixed_beta0 == 0.5);
  CHECK(c.standardize);
  CHECK_THROWS_AS(app::apply_option(c, "lamda", "1"), ConfigError);
  CHECK_THROWS_AS(app::apply_json_config(c, R"({"n_iter": 10, "bogus": 1})"), ConfigError);
  app::apply_json_config(c, R"({"n_iter": 10, "seed": 5})");
  CHECK(c.n_iter == 10);
  CHECK(c.seed == 5u);
  const auto j = app::config_to_json(c);
  CHECK(j.size() == app::option_specs().size());
  CHECK(j["lambda"] == 0.25);

  app::apply_option(c, "beta0_proposal", "sideways");
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(app::exit_code(ErrorCategory::config) == 2);
  CHECK(app::exit_code(ErrorCategory::resource) == 5);
  CHECK(app::error_json(ErrorCategory::data, "x").find("\"data\"") != std::string::npos);
}

TEST_CASE("fit, predict, and manifest") {
  const fs::path dir = scratch("cli");
  io::write_text(dir / "train.csv", "x,y\n-1,-1\n1,1\n");
  app::RunConfig fit = config_for(app::Command::fit, dir / "fit");
  fit.input = (dir / "train.csv").string();
  std::ostringstream log;
  app::run(fit, log);
  const ModelState m = io::read_mode_csv(dir / "fit" / "mode.csv");
  CHECK(m.beta.size() == 1);
  CHECK(m.beta[0] > 0.0);
  const auto manifest = nlohmann::json::parse(io::read_text(dir / "fit" / "manifest.json"));
  CHECK(manifest["command"] == "fit");
  CHECK(manifest["config"]["lambda"] == 1.0);

  app::RunConfig sample = config_for(app::Command::sample, dir / "sample");
  sample.input = fit.input;
  sample.n_iter = 200;
  app::run(sample, log);
  app::RunConfig predict = config_for(app::Command::predict, dir / "predict");
  predict.fit_dir = (dir / "sample").string();
  predict.newdata = fit.input;
  app::run(predict, log);
  CHECK(fs::exists(dir / "predict" / "probabilities.csv"));
  const std::string original = io::read_text(dir / "train.csv");
  CHECK(original == "x,y\n-1,-1\n1,1\n");

  app::RunConfig bad = config_for(app::Command::predict, dir / "bad");
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
