#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "lorafl/codec.hpp"
#include "lorafl/config.hpp"
#include "lorafl/fl.hpp"
#include "lorafl/linkmodel.hpp"
#include "lorafl/linksim.hpp"
#include "lorafl/phy.hpp"

namespace lorafl::sim {

// Named RNG substreams; the standalone FL reference in the tests reproduces
// the engine's draws through these same ids.
enum class Stream : std::uint64_t {
  Topology = 1,
  ModelInit = 2,
  Partition = 3,
  Dataset = 4,
  Sampling = 5,
  Training = 6,
  ClientLink = 7,
  ServerLink = 8,
  ClientInterferers = 9,
  ServerInterferers = 10,
  Replication = 11,
};

inline std::uint64_t stream_seed(std::uint64_t master, Stream s, std::uint64_t a = 0,
                                 std::uint64_t b = 0) {
  return derive_seed(master, {static_cast<std::uint64_t>(s), a, b});
}

struct RoundMetrics {
  int round = 0;
  double accuracy = 0.0;
  double loss = 0.0;
  double completion_time_s = 0.0;          // absolute, when the last uplink ends
  double downlink_airtime_s = 0.0;
  double cumulative_uplink_airtime_s = 0.0;
  std::uint64_t downlink_bytes = 0;
  int downlink_k = 0;  // source fragments of the global-model encoding
  int downlink_n = 0;  // coded fragments (round 1: sizing only, not transmitted)
  std::vector<int> sampled;                 // client ids in sampled order
  std::vector<std::uint8_t> downlink_delivered;  // per sampled client
  std::vector<std::uint8_t> uplink_delivered;    // per sampled client
};

// One transmission burst; device -1 is the server. The duty-cycle audit runs
// over this log.
struct TransmissionRecord {
  int device = -1;
  double start_s = 0.0;
  double airtime_s = 0.0;
};

struct DutyViolation {
  int device = -1;
  double window_start_s = 0.0;
  double window_end_s = 0.0;
  double airtime_s = 0.0;
  double ratio = 0.0;
};

// Class C: the candidate itself. Class B: the next ping-slot boundary
// (integer multiple of the ping period) at or after the candidate.
double downlink_start_time(double candidate_s, LorawanClass cls, double ping_period_s);

// Minimum interval between consecutive update transmissions:
// Delta = k*l / (r * DC_max) * 100, rounded up to a ping-slot multiple for
// class B receptions.
double round_interval_s(int k, double frame_airtime_s, double rate,
                        double duty_cycle_max_pct, LorawanClass cls,
                        double ping_period_s);

// Airtime within each inter-burst window per device must not exceed
// max_pct percent. Returns the violations (empty means compliant).
std::vector<DutyViolation> audit_duty_cycle(const std::vector<TransmissionRecord>& log,
                                            double max_pct, double rel_tol = 1e-9);

class Engine {
 public:
  Engine(const ScenarioConfig& cfg, std::uint64_t seed);

  const RoundMetrics& run_round();
  std::vector<RoundMetrics> run_all();

  int rounds_completed() const { return round_; }
  const std::vector<RoundMetrics>& metrics() const { return metrics_; }
  const std::vector<TransmissionRecord>& transmission_log() const { return log_; }
  const fl::ParamVector& global_model() const { return global_; }
  const std::vector<double>& client_distances() const { return distances_; }
  double frame_airtime_s() const { return frame_airtime_s_; }

 private:
  struct DownlinkResult {
    double start_s = 0.0;
    double end_s = 0.0;
    std::vector<std::uint8_t> delivered;  // per sampled client
  };
  DownlinkResult run_downlink(int round, const std::vector<int>& sampled,
                              const codec::EncodedUpdate& enc, RoundMetrics& rm);
  int count_received_downlink(int client, const codec::EncodedUpdate& enc, double t0);
  double duty_interval_after(int k, int n, bool server_side) const;

  ScenarioConfig cfg_;
  std::uint64_t seed_;
  phy::SpreadingFactor sf_;
  fl::Mlp mlp_;
  codec::PipelineConfig downlink_pipeline_;
  codec::PipelineConfig uplink_pipeline_;
  fl::Dataset test_;
  std::vector<fl::Dataset> shards_;
  std::vector<double> distances_;
  fl::ParamVector global_;
  Rng sampling_rng_;
  double frame_airtime_s_ = 0.0;
  int mtu_ = 0;

  std::vector<std::unique_ptr<linksim::InterfererProcess>> client_procs_;
  std::unique_ptr<linksim::InterfererProcess> server_proc_;
  std::vector<Rng> client_link_rngs_;
  Rng server_link_rng_;
  std::unique_ptr<linkmodel::ProbabilityCache> prob_cache_;

  double server_next_allowed_s_ = 0.0;
  std::vector<double> client_next_allowed_s_;
  double prev_uplink_end_s_ = 0.0;
  int round_ = 0;
  std::vector<TransmissionRecord> log_;
  std::vector<RoundMetrics> metrics_;
};

}  // namespace lorafl::sim
