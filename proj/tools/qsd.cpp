#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qsd/cli/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"qsd: quantum Smoluchowski dispersion toolkit"};
  app.require_subcommand(1);

  std::string run_config, run_out;
  auto* run = app.add_subcommand("run", "Run one scenario and write CSV trajectories");
  run->add_option("--config", run_config, "Scenario config file")->required();
  run->add_option("--out", run_out, "Output directory (overrides output.directory)");

  std::string sweep_config, sweep_key, sweep_out;
  std::vector<std::string> sweep_values;
  auto* sweep = app.add_subcommand("sweep", "Run a scenario once per value of a numeric key");
  sweep->add_option("--config", sweep_config, "Scenario config file")->required();
  sweep->add_option("--key", sweep_key, "Dot-path of the swept field")->required();
  sweep->add_option("--values", sweep_values, "Comma-separated values")
      ->delimiter(',')
      ->expected(0, -1);
  sweep->add_option("--out", sweep_out, "Output directory (overrides output.directory)");

  std::string scales_config;
  auto* scales = app.add_subcommand("scales", "Print derived length and time scales");
  scales->add_option("--config", scales_config, "Scenario config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : qsd::cli::kExitConfig;
  }

  auto optional_path = [](const std::string& s) -> std::optional<std::filesystem::path> {
    if (s.empty()) return std::nullopt;
    return std::filesystem::path(s);
  };

  if (*run) return qsd::cli::run_command(run_config, optional_path(run_out), std::cerr);
  if (*sweep)
    return qsd::cli::sweep_command(sweep_config, sweep_key, sweep_values,
                                   optional_path(sweep_out), std::cerr);
  return qsd::cli::scales_command(scales_config, std::cout, std::cerr);
}
