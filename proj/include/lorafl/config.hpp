#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "lorafl/codec.hpp"
#include "lorafl/fl.hpp"
#include "lorafl/linksim.hpp"
#include "lorafl/phy.hpp"

namespace lorafl {

enum class LorawanClass { B, C };
enum class LinkMode { FullSim, Analytical, Lossless };

struct ScheduleConfig {
  LorawanClass lorawan_class = LorawanClass::B;
  double ping_period_s = 0.03;       // T_p
  double duty_cycle_max_pct = 1.0;   // DC_max, percent
  double processing_delay_s = 10.0;  // delta_p
  int rounds = 15;
  int clients_per_round = 8;  // m
  LinkMode link_mode = LinkMode::FullSim;
  void validate() const;
};

struct TopologyConfig {
  int client_count = 20;
  double radius_m = 500.0;
  void validate() const;
};

struct InterferenceConfig {
  linksim::InterfererConfig process;  // density, frame rate, radius, payloads
  std::array<double, phy::kSfCount> sf_probability{1.0 / 6, 1.0 / 6, 1.0 / 6,
                                                   1.0 / 6, 1.0 / 6, 1.0 / 6};
  std::optional<double> gamma0_override;
};

struct DatasetConfig {
  std::string type = "synthetic";  // "synthetic" | "idx"
  fl::BlobConfig blob;
  std::string idx_train_images, idx_train_labels;
  std::string idx_test_images, idx_test_labels;
  void validate() const;
};

struct ScenarioConfig {
  std::string scenario_id = "default";
  std::uint64_t seed = 1;
  int replications = 1;
  std::string output_dir = ".";
  int sf = 9;
  phy::RadioConfig radio;
  phy::SfTables tables;
  codec::PipelineConfig codec;
  fl::TrainConfig train;
  ScheduleConfig schedule;
  TopologyConfig topology;
  InterferenceConfig interference;
  DatasetConfig dataset;
  void validate() const;
};

// JSON (comments allowed) with every absent field taking its default.
ScenarioConfig load_config(const std::string& path);
ScenarioConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ScenarioConfig& cfg);
void save_config(const ScenarioConfig& cfg, const std::string& path);

// Scenario families for the shipped experiment presets
// (fig1, fig2, fig5, fig6). Each variant is the base config with the swept
// fields overridden and a suffixed scenario_id.
std::vector<ScenarioConfig> apply_preset(const ScenarioConfig& base,
                                         const std::string& preset);
std::vector<std::string> preset_names();

}  // namespace lorafl
