#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "switchbound/runner.hpp"

namespace sb = switchbound;

namespace {

std::optional<std::uint64_t> seed_from_env() {
  const char* v = std::getenv("SWITCHBOUND_SEED");
  if (!v || !*v) return std::nullopt;
  try {
    return sb::detail::Section::parse_count(v, "SWITCHBOUND_SEED");
  } catch (const sb::ConfigError& e) {
    std::cerr << e.what() << '\n';
    std::exit(sb::kExitSchema);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"switchbound: coupled simulation of regime-switching diffusions and perturbation bounds"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicas;
  std::optional<std::string> out;
  std::size_t workers = sb::default_workers();

  auto* run = app.add_subcommand("run", "run a scenario and write its CSVs and report");
  run->add_option("config", config, "scenario file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "master seed (overrides SWITCHBOUND_SEED and the config)");
  run->add_option("--replicas", replicas, "replica count")->check(CLI::PositiveNumber);
  run->add_option("--out", out, "output directory");
  run->add_option("--workers", workers, "worker threads (results do not depend on it)")->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "check a scenario and its rate tables");
  validate->add_option("config", config, "scenario file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : sb::kExitSchema;
  }

  sb::Scenario scenario;
  try {
    scenario = sb::load_scenario(config);
  } catch (const sb::InputError& e) {
    std::cerr << config << ": " << e.what() << '\n';
    return sb::kExitSchema;
  }

  if (validate->parsed()) {
    std::vector<std::string> problems;
    try {
      problems = sb::validate_scenario(scenario);
    } catch (const sb::InputError& e) {
      problems.push_back(e.what());
    }
    for (const auto& p : problems) std::cerr << p << '\n';
    if (!problems.empty()) return sb::kExitSchema;
    std::cout << "valid\n";
    return sb::kExitOk;
  }

  sb::RunOverrides overrides;
  overrides.seed = seed ? seed : seed_from_env();
  overrides.replicas = replicas;
  if (out) overrides.out_dir = *out;
  overrides.workers = workers;
  try {
    const sb::RunResult result = sb::run_scenario(scenario, overrides);
    (result.exit_code == sb::kExitSchema ? std::cerr : std::cout) << result.report;
    return result.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return sb::kExitAssertion;
  }
}
