#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "bdwd/error.hpp"
#include "bdwd/metrics.hpp"
#include "bdwd/model.hpp"
#include "bdwd/simlab.hpp"

namespace bdwd::app {

enum class Command { fit, sample, predict, laplace, bootstrap, simulate, calibrate };

std::string_view to_string(Command command);
Command parse_command(std::string_view name);

struct RunConfig {
  std::optional<Command> command;
  std::string input;
  std::string newdata;
  std::string fit_dir;
  std::string output_dir = "bdwd_out";
  /// PhiTable cache file; defaults to <output_dir>/phi_table.json.
  std::string phi_cache;

  std::string label_column = "y";
  bool zero_one_labels = false;
  bool standardize = false;
  double p1 = 0.5;

  double lambda = 1.0;
  bool infer_lambda = false;
  double lambda_lower = 1.0 / 128.0;
  double lambda_upper = 128.0;
  int phi_grid_points = 25;
  std::int64_t phi_mc_samples = 500;

  /// 0 selects 1000 cycles with lambda fixed and 10000 when inferred.
  int n_iter = 0;
  int burn_in = -1;
  int thin = 1;
  double initial_proposal_sd = 0.0;
  double beta0_proposal_sd = 0.5;
  /// random-walk | centered
  std::string beta0_proposal = "random-walk";
  /// Hold beta0 at this value in fit, sample, laplace, and bootstrap.
  std::optional<double> fixed_beta0;
  double lambda_step_sd = 0.25;
  bool infer_p1 = false;
  int refresh_every = 1000;
  int verify_every = 0;
  double tol = 1e-10;
  int max_iter = 50000;

  double level = 0.95;
  int bootstrap_b = 200;
  bool joint_intercept = false;

  std::string scenario = "assumed-uniform";
  std::optional<int> d;
  std::optional<int> n;
  std::optional<int> n_test;
  double lambda_true = 1.0;
  std::optional<double> tau;
  int n_o = 10;
  int n_u = 0;
  int replications = 1;
  double bimodal_mean_sd = 0.7071067811865476;
  int prior_cycles = 1000;
  std::string methods = "mcmc";
  /// pinned: assumed-model fits hold beta0 at its generative 0; free: sample it.
  std::string intercept = "pinned";
  std::vector<double> lambda_sweep;
  int sweep_cycles = 1000;
  std::string mse_orientation = "as-printed";
  std::string kl_direction = "oracle-to-estimate";
  double calibration_width = 0.02;

  int folds = 5;
  std::uint64_t seed = 1;
  int threads = 0;

  /// Names of options given explicitly (config file or flags).
  std::set<std::string> explicitly_set;

  void validate() const;
};

struct OptionSpec {
  std::string name;
  std::string help;
  bool is_flag = false;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<nlohmann::ordered_json(const RunConfig&)> get;
};

/// Every configurable key; flag names are the keys with '_' replaced by '-'.
const std::vector<OptionSpec>& option_specs();

/// Applies a JSON object of option keys. Unknown keys are ConfigErrors.
void apply_json_config(RunConfig& config, const std::string& json_text);
/// Applies one option by key; the value is parsed from text.
void apply_option(RunConfig& config, const std::string& key, const std::string& value);

/// The resolved configuration, one entry per option key.
nlohmann::ordered_json config_to_json(const RunConfig& config);

/// The scenario and method settings a `simulate` run uses.
ScenarioSpec scenario_from(const RunConfig& config);
MethodConfig methods_from(const RunConfig& config);

/// Executes the command, writing result files and manifest.json into output_dir.
/// Progress lines go to `log`. Throws bdwd::Error on failure.
void run(const RunConfig& config, std::ostream& log);

int exit_code(ErrorCategory category);
/// {"error": {"category": ..., "message": ...}}
std::string error_json(ErrorCategory category, const std::string& message);

}  // namespace bdwd::app
