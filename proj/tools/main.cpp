#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "lorafl/config.hpp"
#include "lorafl/errors.hpp"
#include "lorafl/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Federated learning over LoRa: link-level simulator"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a scenario config and export metrics");
  std::string config_path;
  run->add_option("config", config_path, "Scenario config file (JSON, comments allowed)")
      ->required();
  std::string preset;
  run->add_option("--preset", preset,
                  "Expand the config into a preset scenario family")
      ->check(CLI::IsMember(lorafl::preset_names()));
  std::optional<std::uint64_t> seed;
  run->add_option("--seed", seed, "Override the master seed");
  std::string link_mode;
  run->add_option("--link-mode", link_mode, "Override the link model")
      ->check(CLI::IsMember({"sim", "analytical"}));
  std::string out_dir;
  run->add_option("--out", out_dir, "Output directory (default: config's output_dir)");

  CLI11_PARSE(app, argc, argv);

  try {
    lorafl::ScenarioConfig base = lorafl::load_config(config_path);
    if (seed) base.seed = *seed;
    if (link_mode == "sim") base.schedule.link_mode = lorafl::LinkMode::FullSim;
    if (link_mode == "analytical") base.schedule.link_mode = lorafl::LinkMode::Analytical;
    if (!out_dir.empty()) base.output_dir = out_dir;

    std::vector<lorafl::ScenarioConfig> scenarios;
    if (preset.empty())
      scenarios.push_back(base);
    else
      scenarios = lorafl::apply_preset(base, preset);

    for (const auto& scenario : scenarios) {
      const auto files = lorafl::run_and_export(scenario, scenario.output_dir);
      for (const auto& f : files) std::cout << "wrote " << f << "\n";
    }
  } catch (const lorafl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const lorafl::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
