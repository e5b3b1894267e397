#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "lorafl/phy.hpp"

using namespace lorafl;
using phy::SpreadingFactor;

namespace {

// Independent time-on-air calculator, written from the usual datasheet form
// (floating-point, no symbol-count integer reuse) as a cross-check.
double airtime_oracle(int sf, int payload, double bw, int cr, int n_preamble,
                      bool explicit_header, bool ldro) {
  const double t_sym = std::pow(2.0, sf) / bw;
  const double arg =
      (8.0 * payload - 4.0 * sf + 28.0 + 16.0 - 20.0 * (explicit_header ? 0 : 1)) /
      (4.0 * (sf - 2.0 * (ldro ? 1 : 0)));
  const double n_payload = 8.0 + std::max(std::ceil(arg) * (cr + 4.0), 0.0);
  return (n_preamble + 4.25) * t_sym + n_payload * t_sym;
}

}  // namespace

TEST_CASE("MTU table matches the 125 kHz EU868 values") {
  phy::SfTables tables;
  CHECK(tables.mtu(SpreadingFactor(7)) == 222);
  CHECK(tables.mtu(SpreadingFactor(8)) == 222);
  CHECK(tables.mtu(SpreadingFactor(9)) == 115);
  CHECK(tables.mtu(SpreadingFactor(10)) == 51);
  CHECK(tables.mtu(SpreadingFactor(11)) == 51);
  CHECK(tables.mtu(SpreadingFactor(12)) == 51);
}

TEST_CASE("spreading factor range is enforced") {
  CHECK_THROWS_AS(SpreadingFactor(6), ConfigError);
  CHECK_THROWS_AS(SpreadingFactor(13), ConfigError);
  CHECK(SpreadingFactor(7) < SpreadingFactor(12));
}

TEST_CASE("airtime: SF7 / 51 B reference value") {
  phy::RadioConfig cfg;  // BW 125 kHz, CR 4/5, 8-symbol preamble, explicit header
  phy::SfTables tables;
  const double t = phy::airtime_s(SpreadingFactor(7), 51, cfg, tables);
  // (12.25 + 88 symbols) * 1.024 ms
  CHECK(t == doctest::Approx(0.102656).epsilon(1e-9));
  CHECK(t == doctest::Approx(0.1027).epsilon(5e-4));
}

TEST_CASE("airtime agrees with the independent oracle on a grid") {
  phy::RadioConfig cfg;
  phy::SfTables tables;
  for (auto sf : phy::all_spreading_factors()) {
    for (int payload : {1, 10, 51, 115, 222}) {
      if (payload > tables.mtu(sf)) continue;
      const double got = phy::airtime_s(sf, payload, cfg, tables);
      const double want = airtime_oracle(
          sf.value(), payload, cfg.bandwidth_hz, cfg.coding_rate_index,
          cfg.preamble_symbols, cfg.explicit_header,
          cfg.low_data_rate_optimize[static_cast<std::size_t>(sf.index())]);
      CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("airtime is increasing in SF and nondecreasing in payload") {
  phy::RadioConfig cfg;
  phy::SfTables tables;
  double prev = 0.0;
  for (auto sf : phy::all_spreading_factors()) {
    const double t = phy::airtime_s(sf, 51, cfg, tables);
    CHECK(t > prev);
    prev = t;
  }
  CHECK(phy::airtime_s(SpreadingFactor(9), 51, cfg, tables) >
        phy::airtime_s(SpreadingFactor(7), 51, cfg, tables));
  double prev_payload_time = 0.0;
  for (int payload = 1; payload <= 115; ++payload) {
    const double t = phy::airtime_s(SpreadingFactor(9), payload, cfg, tables);
    CHECK(t >= prev_payload_time);
    prev_payload_time = t;
  }
}

TEST_CASE("airtime rejects empty and oversized payloads") {
  phy::RadioConfig cfg;
  phy::SfTables tables;
  CHECK_THROWS_AS(phy::airtime_s(SpreadingFactor(9), 0, cfg, tables), std::invalid_argument);
  CHECK_THROWS_AS(phy::airtime_s(SpreadingFactor(9), 116, cfg, tables), FragmentationRequired);
  CHECK_THROWS_AS(phy::airtime_s(SpreadingFactor(12), 52, cfg, tables), FragmentationRequired);
}

TEST_CASE("received power: reference-distance and decade identities") {
  phy::RadioConfig cfg;
  cfg.tx_power_dbm = 14.0;
  cfg.ref_loss_db = 40.0;
  cfg.antenna_gain_db = 2.0;
  cfg.path_loss_exponent = 35.0;
  cfg.ref_distance_m = 1.0;
  const double at_ref = phy::received_power_dbm(14.0, 1.0, 1.0, cfg);
  CHECK(at_ref == doctest::Approx(14.0 - 40.0 + 2.0).epsilon(1e-12));
  const double at_decade = phy::received_power_dbm(14.0, 10.0, 1.0, cfg);
  CHECK(at_ref - at_decade == doctest::Approx(35.0).epsilon(1e-12));
}

TEST_CASE("received power: worked example with fading") {
  phy::RadioConfig cfg;
  cfg.ref_loss_db = 40.0;
  cfg.antenna_gain_db = 0.0;
  cfg.path_loss_exponent = 35.0;
  cfg.ref_distance_m = 1.0;
  const double p = phy::received_power_dbm(14.0, 100.0, 0.5, cfg);
  CHECK(p == doctest::Approx(14.0 - 40.0 - 70.0 + 10.0 * std::log10(0.5)).epsilon(1e-12));
  CHECK(p == doctest::Approx(-99.0103).epsilon(1e-5));
}

TEST_CASE("conventional path-loss switch matches the absorbed-exponent form") {
  phy::RadioConfig verbatim;
  verbatim.path_loss_exponent = 35.0;
  phy::RadioConfig conventional = verbatim;
  conventional.path_loss_exponent = 3.5;
  conventional.conventional_path_loss = true;
  for (double d : {10.0, 40.0, 123.0, 500.0})
    CHECK(phy::received_power_dbm(14.0, d, 1.0, verbatim) ==
          doctest::Approx(phy::received_power_dbm(14.0, d, 1.0, conventional)).epsilon(1e-12));
  CHECK(verbatim.linear_path_loss_exponent() == doctest::Approx(3.5));
  CHECK(conventional.linear_path_loss_exponent() == doctest::Approx(3.5));
}

TEST_CASE("received power is strictly decreasing in distance") {
  phy::RadioConfig cfg;
  double prev = 1e9;
  for (double d : {10.0, 50.0, 100.0, 250.0, 500.0, 1000.0}) {
    const double p = phy::received_power_dbm(14.0, d, 1.0, cfg);
    CHECK(p < prev);
    prev = p;
  }
  CHECK_THROWS_AS(phy::received_power_dbm(14.0, 0.0, 1.0, cfg), std::invalid_argument);
}

TEST_CASE("fading samples: reproducibility, mean, median") {
  Rng a(1234), b(1234);
  for (int i = 0; i < 100; ++i) CHECK(phy::sample_fading(a) == phy::sample_fading(b));

  Rng rng(99);
  const int n = 100000;
  double sum = 0.0;
  int below_median = 0;
  for (int i = 0; i < n; ++i) {
    const double x = phy::sample_fading(rng);
    CHECK(x > 0.0);
    sum += x;
    if (x < 0.6931471805599453) ++below_median;
  }
  CHECK(sum / n == doctest::Approx(1.0).epsilon(0.01));
  CHECK(static_cast<double>(below_median) / n == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("fading passes a KS test against Exp(1)") {
  Rng rng(2024);
  const int n = 10000;
  std::vector<double> xs(n);
  for (auto& x : xs) x = phy::sample_fading(rng);
  std::sort(xs.begin(), xs.end());
  double d_stat = 0.0;
  for (int i = 0; i < n; ++i) {
    const double cdf = 1.0 - std::exp(-xs[static_cast<std::size_t>(i)]);
    d_stat = std::max(d_stat, std::abs(cdf - static_cast<double>(i + 1) / n));
    d_stat = std::max(d_stat, std::abs(cdf - static_cast<double>(i) / n));
  }
  // Critical value at significance 0.01 for large n.
  CHECK(d_stat < 1.628 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("threshold comparisons are inclusive") {
  phy::SfTables tables;
  const SpreadingFactor sf9(9);
  const double zeta = tables.sensitivity(sf9);
  CHECK(phy::above_sensitivity(zeta, sf9, tables));
  CHECK_FALSE(phy::above_sensitivity(zeta - 0.1, sf9, tables));

  const SpreadingFactor sf7(7);
  const double xi = tables.capture_threshold(sf9, sf7);
  CHECK(phy::capture_ok(-100.0, -100.0 - xi, sf9, sf7, tables));
  CHECK_FALSE(phy::capture_ok(-100.0, -100.0 - xi + 0.1, sf9, sf7, tables));
}

TEST_CASE("table validation rejects a non-monotone sensitivity column") {
  phy::SfTables tables;
  tables.validate();
  tables.sensitivity_dbm[3] = tables.sensitivity_dbm[2];
  CHECK_THROWS_AS(tables.validate(), ConfigError);
}
