#include "lorafl/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace lorafl {

using nlohmann::json;

void ScheduleConfig::validate() const {
  if (lorawan_class == LorawanClass::B && !(ping_period_s > 0))
    throw ConfigError("schedule.ping_period_s must be positive for class B");
  if (!(duty_cycle_max_pct > 0 && duty_cycle_max_pct <= 100))
    throw ConfigError("schedule.duty_cycle_max_pct must be in (0, 100]");
  if (!(processing_delay_s >= 0))
    throw ConfigError("schedule.processing_delay_s must be nonnegative");
  if (rounds < 1) throw ConfigError("schedule.rounds must be positive");
  if (clients_per_round < 1)
    throw ConfigError("schedule.clients_per_round must be positive");
}

void TopologyConfig::validate() const {
  if (client_count < 1) throw ConfigError("topology.client_count must be positive");
  if (!(radius_m > 0)) throw ConfigError("topology.radius_m must be positive");
}

void DatasetConfig::validate() const {
  if (type != "synthetic" && type != "idx")
    throw ConfigError("dataset.type must be \"synthetic\" or \"idx\"");
  if (type == "synthetic") blob.validate();
  if (type == "idx" &&
      (idx_train_images.empty() || idx_train_labels.empty() || idx_test_images.empty() ||
       idx_test_labels.empty()))
    throw ConfigError("dataset.idx_* paths are required when dataset.type is \"idx\"");
}

void ScenarioConfig::validate() const {
  if (replications < 1) throw ConfigError("replications must be positive");
  phy::SpreadingFactor checked(sf);  // range check
  radio.validate();
  tables.validate();
  codec.validate();
  train.validate();
  schedule.validate();
  topology.validate();
  interference.process.validate();
  dataset.validate();
  if (schedule.clients_per_round > radio.channel_count)
    throw ConfigError("schedule.clients_per_round (" +
                      std::to_string(schedule.clients_per_round) +
                      ") exceeds radio.channel_count (" +
                      std::to_string(radio.channel_count) +
                      "); sampled clients need orthogonal uplink channels");
  if (schedule.clients_per_round > topology.client_count)
    throw ConfigError("schedule.clients_per_round exceeds topology.client_count");
  if (dataset.type == "synthetic" && dataset.blob.feature_dim != train.model.input_dim)
    throw ConfigError("dataset.feature_dim must equal train.model.input_dim");
  if (dataset.type == "synthetic" && dataset.blob.classes != train.model.output_dim)
    throw ConfigError("dataset.classes must equal train.model.output_dim");
  if (dataset.type == "synthetic" &&
      dataset.blob.train_size < topology.client_count)
    throw ConfigError("dataset.train_size must cover at least one sample per client");
  double eta_sum = 0.0;
  for (double e : interference.sf_probability) {
    if (!(e >= 0)) throw ConfigError("interference.sf_probability must be nonnegative");
    eta_sum += e;
  }
  if (std::abs(eta_sum - 1.0) > 1e-9)
    throw ConfigError("interference.sf_probability must sum to 1");
  if (interference.gamma0_override && !(*interference.gamma0_override > 0))
    throw ConfigError("interference.gamma0_override must be positive");
}

namespace {

template <class T>
void get_to_field(const json& j, const char* key, T& out, const std::string& path) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const json::exception& e) {
    throw ConfigError(path + "." + key + ": " + e.what());
  }
}

template <class T, std::size_t N>
void get_to_array(const json& j, const char* key, std::array<T, N>& out,
                  const std::string& path) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != N)
    throw ConfigError(path + "." + key + ": expected an array of " + std::to_string(N));
  for (std::size_t i = 0; i < N; ++i) {
    try {
      a.at(i).get_to(out[i]);
    } catch (const json::exception& e) {
      throw ConfigError(path + "." + key + "[" + std::to_string(i) + "]: " + e.what());
    }
  }
}

void parse_radio(const json& j, phy::RadioConfig& r) {
  get_to_field(j, "bandwidth_hz", r.bandwidth_hz, "radio");
  get_to_field(j, "coding_rate_index", r.coding_rate_index, "radio");
  get_to_field(j, "preamble_symbols", r.preamble_symbols, "radio");
  get_to_field(j, "explicit_header", r.explicit_header, "radio");
  get_to_array(j, "low_data_rate_optimize", r.low_data_rate_optimize, "radio");
  get_to_field(j, "tx_power_dbm", r.tx_power_dbm, "radio");
  get_to_field(j, "path_loss_exponent", r.path_loss_exponent, "radio");
  get_to_field(j, "ref_loss_db", r.ref_loss_db, "radio");
  get_to_field(j, "ref_distance_m", r.ref_distance_m, "radio");
  get_to_field(j, "antenna_gain_db", r.antenna_gain_db, "radio");
  get_to_field(j, "channel_count", r.channel_count, "radio");
  get_to_field(j, "conventional_path_loss", r.conventional_path_loss, "radio");
}

void parse_tables(const json& j, phy::SfTables& t) {
  get_to_array(j, "mtu_bytes", t.mtu_bytes, "tables");
  get_to_array(j, "sensitivity_dbm", t.sensitivity_dbm, "tables");
  if (j.contains("capture_db")) {
    const auto& m = j.at("capture_db");
    if (!m.is_array() || m.size() != phy::kSfCount)
      throw ConfigError("tables.capture_db: expected a 6x6 matrix");
    for (std::size_t i = 0; i < phy::kSfCount; ++i) {
      const auto& row = m.at(i);
      if (!row.is_array() || row.size() != phy::kSfCount)
        throw ConfigError("tables.capture_db: expected a 6x6 matrix");
      for (std::size_t k = 0; k < phy::kSfCount; ++k) row.at(k).get_to(t.capture_db[i][k]);
    }
  }
}

void parse_codec(const json& j, codec::PipelineConfig& c) {
  get_to_field(j, "sparsify_threshold", c.sparsify_threshold, "codec");
  get_to_field(j, "quant_bits", c.quant_bits, "codec");
  get_to_field(j, "fec_rate", c.fec_rate, "codec");
  get_to_field(j, "differential_uplink", c.differential_uplink, "codec");
}

void parse_train(const json& j, fl::TrainConfig& t) {
  get_to_field(j, "local_epochs", t.local_epochs, "train");
  get_to_field(j, "batch_size", t.batch_size, "train");
  get_to_field(j, "learning_rate", t.learning_rate, "train");
  get_to_field(j, "weight_decay", t.weight_decay, "train");
  if (j.contains("model")) {
    const auto& m = j.at("model");
    get_to_field(m, "input_dim", t.model.input_dim, "train.model");
    get_to_field(m, "hidden_dim", t.model.hidden_dim, "train.model");
    get_to_field(m, "output_dim", t.model.output_dim, "train.model");
    get_to_field(m, "init_scale", t.model.init_scale, "train.model");
  }
}

void parse_schedule(const json& j, ScheduleConfig& s) {
  if (j.contains("class")) {
    const auto c = j.at("class").get<std::string>();
    if (c == "B")
      s.lorawan_class = LorawanClass::B;
    else if (c == "C")
      s.lorawan_class = LorawanClass::C;
    else
      throw ConfigError("schedule.class must be \"B\" or \"C\"");
  }
  get_to_field(j, "ping_period_s", s.ping_period_s, "schedule");
  get_to_field(j, "duty_cycle_max_pct", s.duty_cycle_max_pct, "schedule");
  get_to_field(j, "processing_delay_s", s.processing_delay_s, "schedule");
  get_to_field(j, "rounds", s.rounds, "schedule");
  get_to_field(j, "clients_per_round", s.clients_per_round, "schedule");
  if (j.contains("link_mode")) {
    const auto m = j.at("link_mode").get<std::string>();
    if (m == "sim")
      s.link_mode = LinkMode::FullSim;
    else if (m == "analytical")
      s.link_mode = LinkMode::Analytical;
    else if (m == "lossless")
      s.link_mode = LinkMode::Lossless;
    else
      throw ConfigError("schedule.link_mode must be \"sim\", \"analytical\", or \"lossless\"");
  }
}

void parse_interference(const json& j, InterferenceConfig& i) {
  get_to_field(j, "density_per_m2", i.process.density_per_m2, "interference");
  get_to_field(j, "frames_per_hour", i.process.frames_per_hour, "interference");
  get_to_field(j, "radius_m", i.process.radius_m, "interference");
  get_to_array(j, "payload_bytes", i.process.payload_bytes, "interference");
  get_to_array(j, "sf_probability", i.sf_probability, "interference");
  if (j.contains("gamma0_override") && !j.at("gamma0_override").is_null()) {
    double g = 0;
    get_to_field(j, "gamma0_override", g, "interference");
    i.gamma0_override = g;
  }
}

void parse_dataset(const json& j, DatasetConfig& d) {
  get_to_field(j, "type", d.type, "dataset");
  get_to_field(j, "classes", d.blob.classes, "dataset");
  get_to_field(j, "feature_dim", d.blob.feature_dim, "dataset");
  get_to_field(j, "active_dims", d.blob.active_dims, "dataset");
  get_to_field(j, "mean_magnitude", d.blob.mean_magnitude, "dataset");
  get_to_field(j, "noise_sigma", d.blob.noise_sigma, "dataset");
  get_to_field(j, "train_size", d.blob.train_size, "dataset");
  get_to_field(j, "test_size", d.blob.test_size, "dataset");
  get_to_field(j, "idx_train_images", d.idx_train_images, "dataset");
  get_to_field(j, "idx_train_labels", d.idx_train_labels, "dataset");
  get_to_field(j, "idx_test_images", d.idx_test_images, "dataset");
  get_to_field(j, "idx_test_labels", d.idx_test_labels, "dataset");
}

}  // namespace

ScenarioConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  ScenarioConfig cfg;
  get_to_field(j, "scenario_id", cfg.scenario_id, "");
  get_to_field(j, "seed", cfg.seed, "");
  get_to_field(j, "replications", cfg.replications, "");
  get_to_field(j, "output_dir", cfg.output_dir, "");
  get_to_field(j, "sf", cfg.sf, "");
  if (j.contains("radio")) parse_radio(j.at("radio"), cfg.radio);
  if (j.contains("tables")) parse_tables(j.at("tables"), cfg.tables);
  if (j.contains("codec")) parse_codec(j.at("codec"), cfg.codec);
  if (j.contains("train")) parse_train(j.at("train"), cfg.train);
  if (j.contains("schedule")) parse_schedule(j.at("schedule"), cfg.schedule);
  if (j.contains("topology")) {
    get_to_field(j.at("topology"), "client_count", cfg.topology.client_count, "topology");
    get_to_field(j.at("topology"), "radius_m", cfg.topology.radius_m, "topology");
  }
  if (j.contains("interference")) parse_interference(j.at("interference"), cfg.interference);
  if (j.contains("dataset")) parse_dataset(j.at("dataset"), cfg.dataset);
  cfg.validate();
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str());
}

std::string config_to_json_text(const ScenarioConfig& cfg) {
  json j;
  j["scenario_id"] = cfg.scenario_id;
  j["seed"] = cfg.seed;
  j["replications"] = cfg.replications;
  j["output_dir"] = cfg.output_dir;
  j["sf"] = cfg.sf;
  j["radio"] = {{"bandwidth_hz", cfg.radio.bandwidth_hz},
                {"coding_rate_index", cfg.radio.coding_rate_index},
                {"preamble_symbols", cfg.radio.preamble_symbols},
                {"explicit_header", cfg.radio.explicit_header},
                {"low_data_rate_optimize", cfg.radio.low_data_rate_optimize},
                {"tx_power_dbm", cfg.radio.tx_power_dbm},
                {"path_loss_exponent", cfg.radio.path_loss_exponent},
                {"ref_loss_db", cfg.radio.ref_loss_db},
                {"ref_distance_m", cfg.radio.ref_distance_m},
                {"antenna_gain_db", cfg.radio.antenna_gain_db},
                {"channel_count", cfg.radio.channel_count},
                {"conventional_path_loss", cfg.radio.conventional_path_loss}};
  j["tables"] = {{"mtu_bytes", cfg.tables.mtu_bytes},
                 {"sensitivity_dbm", cfg.tables.sensitivity_dbm},
                 {"capture_db", cfg.tables.capture_db}};
  j["codec"] = {{"sparsify_threshold", cfg.codec.sparsify_threshold},
                {"quant_bits", cfg.codec.quant_bits},
                {"fec_rate", cfg.codec.fec_rate},
                {"differential_uplink", cfg.codec.differential_uplink}};
  j["train"] = {{"local_epochs", cfg.train.local_epochs},
                {"batch_size", cfg.train.batch_size},
                {"learning_rate", cfg.train.learning_rate},
                {"weight_decay", cfg.train.weight_decay},
                {"model",
                 {{"input_dim", cfg.train.model.input_dim},
                  {"hidden_dim", cfg.train.model.hidden_dim},
                  {"output_dim", cfg.train.model.output_dim},
                  {"init_scale", cfg.train.model.init_scale}}}};
  j["schedule"] = {{"class", cfg.schedule.lorawan_class == LorawanClass::B ? "B" : "C"},
                   {"ping_period_s", cfg.schedule.ping_period_s},
                   {"duty_cycle_max_pct", cfg.schedule.duty_cycle_max_pct},
                   {"processing_delay_s", cfg.schedule.processing_delay_s},
                   {"rounds", cfg.schedule.rounds},
                   {"clients_per_round", cfg.schedule.clients_per_round},
                   {"link_mode", cfg.schedule.link_mode == LinkMode::FullSim ? "sim"
                                 : cfg.schedule.link_mode == LinkMode::Analytical
                                     ? "analytical"
                                     : "lossless"}};
  j["topology"] = {{"client_count", cfg.topology.client_count},
                   {"radius_m", cfg.topology.radius_m}};
  json interf = {{"density_per_m2", cfg.interference.process.density_per_m2},
                 {"frames_per_hour", cfg.interference.process.frames_per_hour},
                 {"radius_m", cfg.interference.process.radius_m},
                 {"payload_bytes", cfg.interference.process.payload_bytes},
                 {"sf_probability", cfg.interference.sf_probability}};
  if (cfg.interference.gamma0_override)
    interf["gamma0_override"] = *cfg.interference.gamma0_override;
  j["interference"] = interf;
  j["dataset"] = {{"type", cfg.dataset.type},
                  {"classes", cfg.dataset.blob.classes},
                  {"feature_dim", cfg.dataset.blob.feature_dim},
                  {"active_dims", cfg.dataset.blob.active_dims},
                  {"mean_magnitude", cfg.dataset.blob.mean_magnitude},
                  {"noise_sigma", cfg.dataset.blob.noise_sigma},
                  {"train_size", cfg.dataset.blob.train_size},
                  {"test_size", cfg.dataset.blob.test_size},
                  {"idx_train_images", cfg.dataset.idx_train_images},
                  {"idx_train_labels", cfg.dataset.idx_train_labels},
                  {"idx_test_images", cfg.dataset.idx_test_images},
                  {"idx_test_labels", cfg.dataset.idx_test_labels}};
  return j.dump(2) + "\n";
}

void save_config(const ScenarioConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file: " + path);
  out << config_to_json_text(cfg);
}

std::vector<std::string> preset_names() { return {"fig1", "fig2", "fig5", "fig6"}; }

std::vector<ScenarioConfig> apply_preset(const ScenarioConfig& base,
                                         const std::string& preset) {
  std::vector<ScenarioConfig> out;
  auto variant = [&](int sf, double rate, LinkMode mode, double density,
                     const std::string& tag) {
    ScenarioConfig v = base;
    v.sf = sf;
    v.codec.fec_rate = rate;
    v.schedule.link_mode = mode;
    v.interference.process.density_per_m2 = density;
    v.scenario_id = base.scenario_id + "_" + preset + "_" + tag;
    out.push_back(std::move(v));
  };
  const double base_density = base.interference.process.density_per_m2;
  auto rate_tag = [](double r) {
    if (r == 1.0) return std::string("r1");
    if (r == 0.5) return std::string("r1_2");
    if (std::abs(r - 2.0 / 3.0) < 1e-9) return std::string("r2_3");
    if (std::abs(r - 1.0 / 3.0) < 1e-9) return std::string("r1_3");
    std::ostringstream ss;
    ss << "r" << r;
    return ss.str();
  };

  if (preset == "fig1") {
    // (SF, r) grid: FEC necessity and the SF trade-off.
    for (auto [sf, r] : {std::pair{7, 1.0}, {7, 0.5}, {9, 1.0}, {9, 0.5}, {12, 0.5}})
      variant(sf, r, base.schedule.link_mode, base_density,
              "sf" + std::to_string(sf) + "_" + rate_tag(r));
  } else if (preset == "fig2") {
    // FEC-rate sweep at SF 9: completion-time overhead.
    for (double r : {1.0, 2.0 / 3.0, 0.5})
      variant(9, r, base.schedule.link_mode, base_density, "sf9_" + rate_tag(r));
  } else if (preset == "fig5") {
    // Airtime metrics at SF 9, with and without FEC.
    for (double r : {1.0, 0.5})
      variant(9, r, base.schedule.link_mode, base_density, "sf9_" + rate_tag(r));
  } else if (preset == "fig6") {
    // Interference sweep, analytical link model; full-sim checkpoints at 1e-4.
    for (int sf : {7, 9, 10}) {
      for (double density : {1e-5, 1e-4, 1e-3}) {
        std::ostringstream tag;
        tag << "sf" << sf << "_L" << density;
        variant(sf, 0.5, LinkMode::Analytical, density, tag.str());
      }
      std::ostringstream tag;
      tag << "sf" << sf << "_L" << 1e-4 << "_sim";
      variant(sf, 0.5, LinkMode::FullSim, 1e-4, tag.str());
    }
  } else {
    throw ConfigError("unknown preset: " + preset +
                      " (expected fig1, fig2, fig5, or fig6)");
  }
  for (auto& v : out) v.validate();
  return out;
}

}  // namespace lorafl
