#include "lorafl/runner.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace lorafl {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string flags_string(const std::vector<std::uint8_t>& flags) {
  std::string s;
  s.reserve(flags.size());
  for (auto f : flags) s.push_back(f ? '1' : '0');
  return s;
}

}  // namespace

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    out.push_back(c);
    if (c == '"') out.push_back('"');
  }
  out.push_back('"');
  return out;
}

std::vector<MetricRecord> run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  const int reps = cfg.replications;
  std::vector<std::vector<MetricRecord>> per_rep(static_cast<std::size_t>(reps));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(reps));
#pragma omp parallel for schedule(dynamic)
  for (int rep = 0; rep < reps; ++rep) {
    try {
      const std::uint64_t rep_seed =
          sim::stream_seed(cfg.seed, sim::Stream::Replication, static_cast<std::uint64_t>(rep));
      sim::Engine engine(cfg, rep_seed);
      auto rounds = engine.run_all();
      auto& out = per_rep[static_cast<std::size_t>(rep)];
      out.reserve(rounds.size());
      for (auto& rm : rounds)
        out.push_back({cfg.scenario_id, rep, rep_seed, std::move(rm)});
    } catch (...) {
      errors[static_cast<std::size_t>(rep)] = std::current_exception();
    }
  }
  for (const auto& err : errors)
    if (err) std::rethrow_exception(err);
  std::vector<MetricRecord> records;
  for (auto& rep : per_rep)
    for (auto& r : rep) records.push_back(std::move(r));
  return records;
}

void export_csv(const std::vector<MetricRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write metrics file: " + path);
  out << "scenario_id,replication,seed,round,accuracy,loss,completion_time_s,"
         "downlink_airtime_s,cumulative_uplink_airtime_s,downlink_bytes,"
         "downlink_k,downlink_n,sampled_count,downlink_delivered_count,uplink_delivered_count,"
         "uplink_delivered_flags\n";
  for (const auto& r : records) {
    const auto& m = r.metrics;
    int down_count = 0, up_count = 0;
    for (auto f : m.downlink_delivered) down_count += f ? 1 : 0;
    for (auto f : m.uplink_delivered) up_count += f ? 1 : 0;
    out << csv_escape(r.scenario_id) << ',' << r.replication << ',' << r.seed << ','
        << m.round << ',' << format_double(m.accuracy) << ',' << format_double(m.loss)
        << ',' << format_double(m.completion_time_s) << ','
        << format_double(m.downlink_airtime_s) << ','
        << format_double(m.cumulative_uplink_airtime_s) << ',' << m.downlink_bytes << ','
        << m.downlink_k << ',' << m.downlink_n << ',' << m.sampled.size() << ',' << down_count << ',' << up_count << ','
        << flags_string(m.uplink_delivered) << '\n';
  }
  if (!out) throw ConfigError("write failed: " + path);
}

void export_jsonl(const std::vector<MetricRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write metrics file: " + path);
  for (const auto& r : records) {
    const auto& m = r.metrics;
    nlohmann::json j{{"scenario_id", r.scenario_id},
                     {"replication", r.replication},
                     {"seed", r.seed},
                     {"round", m.round},
                     {"accuracy", m.accuracy},
                     {"loss", m.loss},
                     {"completion_time_s", m.completion_time_s},
                     {"downlink_airtime_s", m.downlink_airtime_s},
                     {"cumulative_uplink_airtime_s", m.cumulative_uplink_airtime_s},
                     {"downlink_bytes", m.downlink_bytes},
                     {"downlink_k", m.downlink_k},
                     {"downlink_n", m.downlink_n},
                     {"sampled", m.sampled},
                     {"downlink_delivered", m.downlink_delivered},
                     {"uplink_delivered", m.uplink_delivered}};
    out << j.dump() << '\n';
  }
  if (!out) throw ConfigError("write failed: " + path);
}

std::vector<std::string> run_and_export(const ScenarioConfig& cfg,
                                        const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const auto records = run_scenario(cfg);
  const std::string csv = (std::filesystem::path(out_dir) / (cfg.scenario_id + ".csv")).string();
  const std::string jsonl =
      (std::filesystem::path(out_dir) / (cfg.scenario_id + ".jsonl")).string();
  export_csv(records, csv);
  export_jsonl(records, jsonl);
  return {csv, jsonl};
}

}  // namespace lorafl
