#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <array>
#include <cmath>

#include "doctest.h"
#include "lorafl/linkmodel.hpp"
#include "lorafl/linksim.hpp"

using namespace lorafl;
using namespace lorafl::linksim;
using phy::SpreadingFactor;

namespace {

InterfererConfig quiet_config() {
  InterfererConfig cfg;
  cfg.density_per_m2 = 0.0;
  return cfg;
}

}  // namespace

TEST_CASE("spawn_interferers: zero intensity, expected count, determinism") {
  Rng rng(5);
  CHECK(spawn_interferers(0.0, 1000.0, rng).empty());

  double total = 0.0;
  const int runs = 1000;
  for (int i = 0; i < runs; ++i) {
    const auto pop = spawn_interferers(1e-5, 1000.0, rng);
    total += static_cast<double>(pop.size());
    for (const auto& itf : pop) {
      CHECK(itf.distance_m >= 0.0);
      CHECK(itf.distance_m <= 1000.0);
    }
  }
  CHECK(total / runs == doctest::Approx(1e-5 * M_PI * 1e6).epsilon(0.032));  // ~31.4 +- 1

  Rng r1(9), r2(9);
  const auto p1 = spawn_interferers(1e-5, 1000.0, r1);
  const auto p2 = spawn_interferers(1e-5, 1000.0, r2);
  REQUIRE(p1.size() == p2.size());
  for (std::size_t i = 0; i < p1.size(); ++i) {
    CHECK(p1[i].distance_m == p2[i].distance_m);
    CHECK(p1[i].angle_rad == p2[i].angle_rad);
  }
}

TEST_CASE("interferer traffic statistics: gaps, SF and channel histograms") {
  phy::RadioConfig radio;
  phy::SfTables tables;
  InterfererConfig cfg;
  cfg.density_per_m2 = 5e-5;  // a few hundred devices
  cfg.frames_per_hour = 10.0;
  InterfererProcess proc(cfg, radio, tables, Rng(123));

  // Pull a long horizon and histogram everything via collect on all channels.
  std::vector<InterfererFrame> frames;
  for (int ch = 0; ch < radio.channel_count; ++ch)
    proc.collect_overlapping(0.0, 3600.0 * 6, ch, frames);

  REQUIRE(frames.size() > 30000);
  std::array<int, 6> sf_hist{};
  std::vector<int> ch_hist(static_cast<std::size_t>(radio.channel_count), 0);
  for (const auto& f : frames) {
    ++sf_hist[static_cast<std::size_t>(f.sf_value - 7)];
    ++ch_hist[static_cast<std::size_t>(f.channel)];
    CHECK(f.duration_s > 0.0);
    CHECK(f.duration_s ==
          phy::airtime_s(SpreadingFactor(f.sf_value),
                         cfg.payload_bytes[static_cast<std::size_t>(f.sf_value - 7)], radio,
                         tables));
  }
  for (int count : sf_hist)
    CHECK(static_cast<double>(count) / static_cast<double>(frames.size()) ==
          doctest::Approx(1.0 / 6).epsilon(0.06));
  for (int count : ch_hist)
    CHECK(static_cast<double>(count) / static_cast<double>(frames.size()) ==
          doctest::Approx(1.0 / 8).epsilon(0.06));

  // Mean inter-frame gap per interferer ~ 3600 / lambda_f.
  const double horizon = 3600.0 * 6;
  const double per_interferer_rate =
      static_cast<double>(frames.size()) /
      (static_cast<double>(proc.interferer_count()) * horizon);
  CHECK(per_interferer_rate == doctest::Approx(10.0 / 3600.0).epsilon(0.02));
}

TEST_CASE("frame_outcome: clean channel, capture failure, channel orthogonality") {
  phy::RadioConfig radio;
  phy::SfTables tables;
  const SpreadingFactor sf9(9);
  const Frame frame{sf9, 2, 100.0, 0.6, radio.tx_power_dbm};

  LinkRealization clean{1.0, {}};
  CHECK(frame_outcome(frame, 100.0, clean, tables, radio));  // well above zeta

  // A strong co-channel interferer breaks capture.
  const double sig = phy::received_power_dbm(radio.tx_power_dbm, 100.0, 1.0, radio);
  InterfererFrame strong{9, 2, 100.1, 0.5, sig - tables.capture_threshold(sf9, sf9) + 1.0};
  LinkRealization jammed{1.0, {strong}};
  CHECK_FALSE(frame_outcome(frame, 100.0, jammed, tables, radio));

  // Same interferer on another channel is ignored.
  InterfererFrame other = strong;
  other.channel = 3;
  LinkRealization off_channel{1.0, {other}};
  CHECK(frame_outcome(frame, 100.0, off_channel, tables, radio));

  // Out of range even with unit fading.
  CHECK_FALSE(frame_outcome(frame, 500000.0, clean, tables, radio));
}

TEST_CASE("adding interferer frames never turns a loss into a success") {
  phy::RadioConfig radio;
  phy::SfTables tables;
  Rng rng(17);
  const SpreadingFactor sf9(9);
  for (int trial = 0; trial < 500; ++trial) {
    const double d = 50.0 + rng.uniform() * 800.0;
    const Frame frame{sf9, 0, 0.0, 0.6, radio.tx_power_dbm};
    LinkRealization real;
    real.fading = rng.exponential(1.0);
    const int base_count = static_cast<int>(rng.uniform_int(4));
    for (int i = 0; i < base_count; ++i) {
      InterfererFrame f{7 + static_cast<int>(rng.uniform_int(6)), 0, 0.0, 1.0,
                        phy::received_power_dbm(14.0, 50.0 + rng.uniform() * 1500.0,
                                                rng.exponential(1.0), radio)};
      real.overlapping.push_back(f);
    }
    const bool before = frame_outcome(frame, d, real, tables, radio);
    InterfererFrame extra{7 + static_cast<int>(rng.uniform_int(6)), 0, 0.0, 1.0,
                          phy::received_power_dbm(14.0, 50.0 + rng.uniform() * 1500.0,
                                                  rng.exponential(1.0), radio)};
    real.overlapping.push_back(extra);
    const bool after = frame_outcome(frame, d, real, tables, radio);
    if (after) CHECK(before);
  }
}

TEST_CASE("with no interferers and unit fading the outcome is a range check") {
  phy::RadioConfig radio;
  phy::SfTables tables;
  const SpreadingFactor sf9(9);
  LinkRealization real{1.0, {}};
  for (double d : {10.0, 100.0, 400.0, 1000.0, 4000.0, 20000.0}) {
    const Frame frame{sf9, 0, 0.0, 0.6, radio.tx_power_dbm};
    const bool expect =
        phy::received_power_dbm(radio.tx_power_dbm, d, 1.0, radio) >= tables.sensitivity(sf9);
    CHECK(frame_outcome(frame, d, real, tables, radio) == expect);
  }
}

TEST_CASE("transmit_fragments: multicast with a clean channel delivers everything") {
  phy::RadioConfig radio;
  phy::SfTables tables;
  const SpreadingFactor sf9(9);
  const double l = phy::airtime_s(sf9, tables.mtu(sf9), radio, tables);
  std::vector<Frame> frames;
  for (int f = 0; f < 6; ++f) frames.push_back({sf9, 0, f * l, l, 60.0});  // huge margin

  std::vector<Receiver> receivers{{0, 100.0}, {1, 300.0}};
  InterfererProcess pa(quiet_config(), radio, tables, Rng(1));
  InterfererProcess pb(quiet_config(), radio, tables, Rng(2));
  Rng ra(3), rb(4);
  std::array<InterfererProcess*, 2> procs{&pa, &pb};
  std::array<Rng*, 2> rngs{&ra, &rb};
  const auto got = transmit_fragments(frames, receivers, procs, rngs, tables, radio);
  REQUIRE(got.size() == 2);
  CHECK(got[0] == std::vector<int>{0, 1, 2, 3, 4, 5});
  CHECK(got[1] == std::vector<int>{0, 1, 2, 3, 4, 5});

  // A receiver far beyond sensitivity range gets nothing even at A = 1.
  std::vector<Frame> weak;
  for (int f = 0; f < 6; ++f) weak.push_back({sf9, 0, f * l, l, radio.tx_power_dbm});
  std::vector<Receiver> far{{0, 1e7}};
  InterfererProcess pc(quiet_config(), radio, tables, Rng(5));
  Rng rc(6);
  std::array<InterfererProcess*, 1> procs1{&pc};
  std::array<Rng*, 1> rngs1{&rc};
  CHECK(transmit_fragments(weak, far, procs1, rngs1, tables, radio)[0].empty());
}

TEST_CASE("per-receiver delivery statistics track the analytical model") {
  phy::RadioConfig radio;
  phy::SfTables tables;
  const SpreadingFactor sf9(9);
  InterfererConfig cfg;  // defaults: 1e-5, 10 frames/h
  const auto params = linkmodel::derive_params(radio, tables, cfg.density_per_m2,
                                               cfg.frames_per_hour, cfg.radius_m,
                                               std::nullopt, cfg.payload_bytes);
  const double d = 300.0;
  const auto est = estimate_success_rate(sf9, d, cfg, radio, tables, 20000, 99);
  const double p = linkmodel::success_probability(sf9, d, params);
  // Binomial 99.9% band around p at n = 2e4 plus model slack.
  const double band = 3.3 * std::sqrt(p * (1 - p) / 20000.0) + 0.01;
  CHECK(std::abs(est.rate() - p) <= band);
}

TEST_CASE("Monte Carlo estimator: parallel equals serial, determinism") {
  phy::RadioConfig radio;
  phy::SfTables tables;
  const SpreadingFactor sf7(7);
  InterfererConfig cfg;
  cfg.density_per_m2 = 1e-4;
  const auto a = estimate_success_rate(sf7, 200.0, cfg, radio, tables, 8000, 7, 16, true);
  const auto b = estimate_success_rate(sf7, 200.0, cfg, radio, tables, 8000, 7, 16, false);
  CHECK(a.successes == b.successes);
  CHECK(a.frames == b.frames);
  const auto c = estimate_success_rate(sf7, 200.0, cfg, radio, tables, 8000, 7, 16, true);
  CHECK(a.successes == c.successes);
  const auto other_seed = estimate_success_rate(sf7, 200.0, cfg, radio, tables, 8000, 8, 16);
  CHECK(other_seed.successes != a.successes);  // astronomically unlikely to tie
}

TEST_CASE("release_before keeps queries over a shared window intact") {
  phy::RadioConfig radio;
  phy::SfTables tables;
  InterfererConfig cfg;
  cfg.density_per_m2 = 1e-4;
  cfg.frames_per_hour = 3600.0;  // dense traffic
  InterfererProcess proc(cfg, radio, tables, Rng(11));
  std::vector<InterfererFrame> first, second;
  proc.collect_overlapping(10.0, 12.0, 0, first);
  proc.collect_overlapping(10.0, 12.0, 0, second);  // same window, same answer
  REQUIRE(first.size() == second.size());
  for (std::size_t i = 0; i < first.size(); ++i)
    CHECK(first[i].start_s == second[i].start_s);
  proc.release_before(12.0);
  std::vector<InterfererFrame> later;
  proc.collect_overlapping(12.0, 13.0, 0, later);  // still generates onward
  for (const auto& f : later) CHECK(f.start_s + f.duration_s > 12.0);
}
