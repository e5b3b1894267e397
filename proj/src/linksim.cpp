#include "lorafl/linksim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "lorafl/errors.hpp"

namespace lorafl::linksim {

void InterfererConfig::validate() const {
  if (!(density_per_m2 >= 0))
    throw ConfigError("interference.density_per_m2 must be nonnegative");
  if (!(frames_per_hour >= 0))
    throw ConfigError("interference.frames_per_hour must be nonnegative");
  if (!(radius_m > 0)) throw ConfigError("interference.radius_m must be positive");
  for (int b : payload_bytes)
    if (b < 1) throw ConfigError("interference.payload_bytes must be positive");
}

std::vector<Interferer> spawn_interferers(double density_per_m2, double radius_m, Rng& rng) {
  if (!(density_per_m2 >= 0) || !(radius_m > 0))
    throw std::invalid_argument("spawn_interferers: bad density or radius");
  const double mean = density_per_m2 * std::numbers::pi * radius_m * radius_m;
  const auto count = rng.poisson(mean);
  std::vector<Interferer> out(count);
  for (auto& itf : out) {
    itf.distance_m = radius_m * std::sqrt(rng.uniform());
    itf.angle_rad = 2.0 * std::numbers::pi * rng.uniform();
  }
  return out;
}

InterfererProcess::InterfererProcess(const InterfererConfig& cfg,
                                     const phy::RadioConfig& radio,
                                     const phy::SfTables& tables, Rng rng)
    : cfg_(cfg), radio_(radio), tables_(tables), rng_(rng) {
  cfg_.validate();
  radio_.validate();
  tables_.validate();
  double max_airtime = 0.0;
  for (auto sf : phy::all_spreading_factors()) {
    const auto i = static_cast<std::size_t>(sf.index());
    frame_airtime_s_[i] = phy::airtime_s(sf, cfg_.payload_bytes[i], radio_, tables_);
    max_airtime = std::max(max_airtime, frame_airtime_s_[i]);
  }
  interferers_ = spawn_interferers(cfg_.density_per_m2, cfg_.radius_m, rng_);
  // Start generation before t = 0 so frames already in flight at the first
  // query are represented (stationary start).
  horizon_s_ = -max_airtime;
  if (cfg_.frames_per_hour > 0) {
    mean_gap_s_ = 3600.0 / cfg_.frames_per_hour;
    for (std::size_t i = 0; i < interferers_.size(); ++i) {
      interferers_[i].next_tx_s = horizon_s_ + rng_.exponential(mean_gap_s_);
      next_.emplace(interferers_[i].next_tx_s, i);
    }
  }
}

void InterfererProcess::generate_until(double t_s) {
  while (!next_.empty() && next_.top().first < t_s) {
    const auto [start, idx] = next_.top();
    next_.pop();
    InterfererFrame frame;
    frame.sf_value = phy::kMinSf + static_cast<int>(rng_.uniform_int(phy::kSfCount));
    frame.channel = static_cast<int>(rng_.uniform_int(static_cast<std::uint64_t>(radio_.channel_count)));
    frame.start_s = start;
    frame.duration_s = frame_airtime_s_[static_cast<std::size_t>(frame.sf_value - phy::kMinSf)];
    const double fading = rng_.exponential(1.0);
    frame.rx_power_dbm =
        phy::received_power_dbm(radio_.tx_power_dbm, interferers_[idx].distance_m, fading, radio_);
    frames_.push_back(frame);
    interferers_[idx].next_tx_s = start + rng_.exponential(mean_gap_s_);
    next_.emplace(interferers_[idx].next_tx_s, idx);
  }
  horizon_s_ = std::max(horizon_s_, t_s);
}

void InterfererProcess::collect_overlapping(double start_s, double end_s, int channel,
                                            std::vector<InterfererFrame>& out) {
  generate_until(end_s);
  for (const auto& f : frames_) {
    if (f.start_s >= end_s) break;  // deque is ordered by start
    if (f.channel == channel && f.start_s + f.duration_s > start_s) out.push_back(f);
  }
}

void InterfererProcess::release_before(double t_s) {
  while (!frames_.empty() && frames_.front().start_s + frames_.front().duration_s <= t_s)
    frames_.pop_front();
}

bool frame_outcome(const Frame& frame, double distance_m, const LinkRealization& real,
                   const phy::SfTables& tables, const phy::RadioConfig& radio) {
  const double signal_dbm =
      phy::received_power_dbm(frame.tx_power_dbm, distance_m, real.fading, radio);
  if (!phy::above_sensitivity(signal_dbm, frame.sf, tables)) return false;
  for (const auto& itf : real.overlapping) {
    if (itf.channel != frame.channel) continue;
    if (!phy::capture_ok(signal_dbm, itf.rx_power_dbm, frame.sf,
                         phy::SpreadingFactor(itf.sf_value), tables))
      return false;
  }
  return true;
}

std::vector<std::vector<int>> transmit_fragments(
    const std::vector<Frame>& frames, const std::vector<Receiver>& receivers,
    std::span<InterfererProcess* const> processes, std::span<Rng* const> fading_rngs,
    const phy::SfTables& tables, const phy::RadioConfig& radio) {
  if (processes.size() != receivers.size() || fading_rngs.size() != receivers.size())
    throw std::invalid_argument("transmit_fragments: per-receiver state misaligned");
  std::vector<std::vector<int>> received(receivers.size());
  for (std::size_t r = 0; r < receivers.size(); ++r) {
    LinkRealization real;
    for (std::size_t f = 0; f < frames.size(); ++f) {
      const auto& frame = frames[f];
      real.fading = phy::sample_fading(*fading_rngs[r]);
      real.overlapping.clear();
      processes[r]->collect_overlapping(frame.start_s, frame.start_s + frame.airtime_s,
                                        frame.channel, real.overlapping);
      if (frame_outcome(frame, receivers[r].distance_m, real, tables, radio))
        received[r].push_back(static_cast<int>(f));
    }
  }
  return received;
}

namespace {

std::uint64_t chunk_successes(phy::SpreadingFactor sf, double distance_m,
                              const InterfererConfig& cfg, const phy::RadioConfig& radio,
                              const phy::SfTables& tables, std::uint64_t frames,
                              std::uint64_t seed, int chunk) {
  InterfererProcess process(cfg, radio, tables,
                            Rng(derive_seed(seed, {static_cast<std::uint64_t>(chunk), 0})));
  Rng fading_rng(derive_seed(seed, {static_cast<std::uint64_t>(chunk), 1}));
  const double airtime = phy::airtime_s(sf, tables.mtu(sf), radio, tables);
  std::uint64_t ok = 0;
  LinkRealization real;
  for (std::uint64_t f = 0; f < frames; ++f) {
    const double start = static_cast<double>(f) * airtime;
    Frame frame{sf, 0, start, airtime, radio.tx_power_dbm};
    real.fading = phy::sample_fading(fading_rng);
    real.overlapping.clear();
    process.collect_overlapping(start, start + airtime, frame.channel, real.overlapping);
    if (frame_outcome(frame, distance_m, real, tables, radio)) ++ok;
    process.release_before(start);
  }
  return ok;
}

}  // namespace

SuccessEstimate estimate_success_rate(phy::SpreadingFactor sf, double distance_m,
                                      const InterfererConfig& cfg,
                                      const phy::RadioConfig& radio,
                                      const phy::SfTables& tables,
                                      std::uint64_t frame_count, std::uint64_t seed,
                                      int chunk_count, bool parallel) {
  if (chunk_count < 1) throw std::invalid_argument("estimate_success_rate: chunk_count >= 1");
  std::vector<std::uint64_t> per_chunk(static_cast<std::size_t>(chunk_count), 0);
  std::vector<std::uint64_t> frames(static_cast<std::size_t>(chunk_count), 0);
  for (int c = 0; c < chunk_count; ++c)
    frames[static_cast<std::size_t>(c)] =
        frame_count / static_cast<std::uint64_t>(chunk_count) +
        (static_cast<std::uint64_t>(c) < frame_count % static_cast<std::uint64_t>(chunk_count) ? 1 : 0);
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int c = 0; c < chunk_count; ++c)
      per_chunk[static_cast<std::size_t>(c)] = chunk_successes(
          sf, distance_m, cfg, radio, tables, frames[static_cast<std::size_t>(c)], seed, c);
  } else {
    for (int c = 0; c < chunk_count; ++c)
      per_chunk[static_cast<std::size_t>(c)] = chunk_successes(
          sf, distance_m, cfg, radio, tables, frames[static_cast<std::size_t>(c)], seed, c);
  }
  SuccessEstimate est;
  est.frames = frame_count;
  for (auto s : per_chunk) est.successes += s;
  return est;
}

}  // namespace lorafl::linksim
