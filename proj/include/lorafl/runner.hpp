#pragma once

#include <string>
#include <vector>

#include "lorafl/config.hpp"
#include "lorafl/sim.hpp"

namespace lorafl {

struct MetricRecord {
  std::string scenario_id;
  int replication = 0;
  std::uint64_t seed = 0;  // the replication's derived seed
  sim::RoundMetrics metrics;
};

// All replications of one scenario; records ordered by (replication, round).
// Replications run concurrently on disjoint RNG streams.
std::vector<MetricRecord> run_scenario(const ScenarioConfig& cfg);

// RFC 4180 CSV (header always present) and line-delimited JSON.
void export_csv(const std::vector<MetricRecord>& records, const std::string& path);
void export_jsonl(const std::vector<MetricRecord>& records, const std::string& path);

// Runs and writes <out_dir>/<scenario_id>.csv and .jsonl; returns the paths.
std::vector<std::string> run_and_export(const ScenarioConfig& cfg,
                                        const std::string& out_dir);

std::string csv_escape(const std::string& field);

}  // namespace lorafl
