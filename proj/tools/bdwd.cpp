#include <algorithm>
#include <exception>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "app.hpp"
#include "bdwd/io.hpp"
#include "bdwd/version.hpp"

namespace {

std::string flag_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace bdwd;
  CLI::App cli{"Bayesian distance weighted discrimination"};
  cli.set_version_flag("--version", std::string(kVersion));

  std::string command, config_path;
  cli.add_option("command", command,
                 "fit | sample | predict | laplace | bootstrap | simulate | calibrate");
  cli.add_option("--config", config_path, "JSON config file; flags override its keys");

  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;
  std::map<std::string, CLI::Option*> handles;
  for (const auto& spec : app::option_specs()) {
    if (spec.name == "command") continue;
    if (spec.is_flag)
      handles[spec.name] = cli.add_flag(flag_name(spec.name), flags[spec.name], spec.help);
    else
      handles[spec.name] = cli.add_option(flag_name(spec.name), values[spec.name], spec.help);
  }

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return cli.exit(e);
    std::cerr << app::error_json(ErrorCategory::config, e.what()) << "\n";
    return app::exit_code(ErrorCategory::config);
  }

  try {
    app::RunConfig config;
    if (!config_path.empty()) app::apply_json_config(config, io::read_text(config_path));
    if (!command.empty()) app::apply_option(config, "command", command);
    for (const auto& [name, opt] : handles) {
      if (opt->count() == 0) continue;
      app::apply_option(config, name, flags.count(name) ? (flags[name] ? "true" : "false")
                                                        : values[name]);
    }
    app::run(config, std::cerr);
    return 0;
  } catch (const Error& e) {
    std::cerr << app::error_json(e.category(), e.what()) << "\n";
    return app::exit_code(e.category());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << app::error_json(ErrorCategory::resource, e.what()) << "\n";
    return app::exit_code(ErrorCategory::resource);
  } catch (const std::exception& e) {
    std::cerr << app::error_json(ErrorCategory::numeric, e.what()) << "\n";
    return app::exit_code(ErrorCategory::numeric);
  }
}
