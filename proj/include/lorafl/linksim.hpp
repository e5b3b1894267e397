#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <queue>
#include <span>
#include <vector>

#include "lorafl/phy.hpp"
#include "lorafl/rng.hpp"

namespace lorafl::linksim {

struct InterfererConfig {
  double density_per_m2 = 1e-5;   // lambda_I
  double frames_per_hour = 10.0;  // lambda_f per interferer
  double radius_m = 2000.0;       // R_I, receiver-centric
  // Payload of an interfering frame per SF; defaults to the SF's MTU.
  std::array<int, phy::kSfCount> payload_bytes{222, 222, 115, 51, 51, 51};
  void validate() const;
};

struct Interferer {
  double distance_m = 0.0;  // from the receiver this population belongs to
  double angle_rad = 0.0;
  double next_tx_s = 0.0;
};

struct InterfererFrame {
  int sf_value = 7;
  int channel = 0;
  double start_s = 0.0;
  double duration_s = 0.0;
  double rx_power_dbm = 0.0;  // at the owning receiver, own fading draw applied
};

// Poisson placement on the disk of radius R around one receiver;
// count ~ Poisson(lambda_I * pi * R^2).
std::vector<Interferer> spawn_interferers(double density_per_m2, double radius_m, Rng& rng);

// Lazy, receiver-centric interferer traffic. Frames are generated in global
// time order on demand; the caller prunes with release_before once a window
// can no longer be queried.
class InterfererProcess {
 public:
  InterfererProcess(const InterfererConfig& cfg, const phy::RadioConfig& radio,
                    const phy::SfTables& tables, Rng rng);

  // Appends all frames overlapping [start_s, end_s) on `channel` to out.
  void collect_overlapping(double start_s, double end_s, int channel,
                           std::vector<InterfererFrame>& out);
  void release_before(double t_s);
  std::size_t interferer_count() const { return interferers_.size(); }

 private:
  void generate_until(double t_s);
  InterfererConfig cfg_;
  phy::RadioConfig radio_;
  phy::SfTables tables_;
  Rng rng_;
  double mean_gap_s_ = 0.0;
  std::array<double, phy::kSfCount> frame_airtime_s_{};
  std::vector<Interferer> interferers_;
  using Entry = std::pair<double, std::size_t>;  // (next tx, interferer idx)
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> next_;
  std::deque<InterfererFrame> frames_;  // ordered by start time
  double horizon_s_ = 0.0;
};

struct Frame {
  phy::SpreadingFactor sf;
  int channel = 0;
  double start_s = 0.0;
  double airtime_s = 0.0;
  double tx_power_dbm = 14.0;
};

struct LinkRealization {
  double fading = 1.0;
  std::vector<InterfererFrame> overlapping;
};

// Reception test: above sensitivity, and pairwise capture against every
// co-channel overlapping interferer frame.
bool frame_outcome(const Frame& frame, double distance_m, const LinkRealization& real,
                   const phy::SfTables& tables, const phy::RadioConfig& radio);

struct Receiver {
  int id = 0;
  double distance_m = 0.0;
};

// One sender's back-to-back burst, received independently per receiver
// (multicast semantics: one transmission, per-receiver fading and interferer
// state). processes/fading_rngs are per-receiver and aligned with receivers.
std::vector<std::vector<int>> transmit_fragments(
    const std::vector<Frame>& frames, const std::vector<Receiver>& receivers,
    std::span<InterfererProcess* const> processes, std::span<Rng* const> fading_rngs,
    const phy::SfTables& tables, const phy::RadioConfig& radio);

struct SuccessEstimate {
  std::uint64_t successes = 0;
  std::uint64_t frames = 0;
  double rate() const {
    return frames == 0 ? 0.0 : static_cast<double>(successes) / static_cast<double>(frames);
  }
};

// Monte Carlo frame-success frequency at one (SF, distance). Work is split
// into fixed chunks, each with its own interferer realization and RNG stream,
// so results are independent of thread count; `parallel` switches the OpenMP
// path against the serial reference.
SuccessEstimate estimate_success_rate(phy::SpreadingFactor sf, double distance_m,
                                      const InterfererConfig& cfg,
                                      const phy::RadioConfig& radio,
                                      const phy::SfTables& tables,
                                      std::uint64_t frame_count, std::uint64_t seed,
                                      int chunk_count = 64, bool parallel = true);

}  // namespace lorafl::linksim
