#pragma once

#include <array>
#include <compare>

#include "lorafl/errors.hpp"
#include "lorafl/rng.hpp"

namespace lorafl::phy {

inline constexpr int kMinSf = 7;
inline constexpr int kMaxSf = 12;
inline constexpr int kSfCount = kMaxSf - kMinSf + 1;

class SpreadingFactor {
 public:
  explicit SpreadingFactor(int value) : value_(value) {
    if (value < kMinSf || value > kMaxSf)
      throw ConfigError("spreading factor must be in [7, 12]");
  }
  int value() const { return value_; }
  int index() const { return value_ - kMinSf; }  // 0..5
  friend auto operator<=>(SpreadingFactor a, SpreadingFactor b) = default;

 private:
  int value_;
};

inline std::array<SpreadingFactor, kSfCount> all_spreading_factors() {
  return {SpreadingFactor(7),  SpreadingFactor(8),  SpreadingFactor(9),
          SpreadingFactor(10), SpreadingFactor(11), SpreadingFactor(12)};
}

struct RadioConfig {
  double bandwidth_hz = 125000.0;
  int coding_rate_index = 1;  // code rate 4/(4+cr), cr in 1..4
  int preamble_symbols = 8;
  bool explicit_header = true;
  // Low-data-rate optimization per SF; on for SF11/12 at 125 kHz.
  std::array<bool, kSfCount> low_data_rate_optimize{false, false, false,
                                                    false, true,  true};
  double tx_power_dbm = 14.0;
  // Path loss model: L(d) = ref_loss_db + slope * log10(d / ref_distance_m).
  // With conventional_path_loss=false the slope is path_loss_exponent itself
  // (the exponent absorbs the usual factor 10); with true it is
  // 10 * path_loss_exponent.
  double path_loss_exponent = 21.0;
  double ref_loss_db = 110.0;
  double ref_distance_m = 40.0;
  double antenna_gain_db = 0.0;
  int channel_count = 8;
  bool conventional_path_loss = false;

  double path_loss_slope_db_per_decade() const {
    return conventional_path_loss ? 10.0 * path_loss_exponent : path_loss_exponent;
  }
  // Exponent of distance in the linear-power domain.
  double linear_path_loss_exponent() const {
    return path_loss_slope_db_per_decade() / 10.0;
  }
  double path_loss_db(double distance_m) const;
  void validate() const;
};

struct SfTables {
  // EU868, 125 kHz maximum payload per SF.
  std::array<int, kSfCount> mtu_bytes{222, 222, 115, 51, 51, 51};
  // Receiver sensitivity per SF, dBm. Typical 125-kHz values; configurable,
  // not normative.
  std::array<double, kSfCount> sensitivity_dbm{-123.0, -125.6, -128.2,
                                               -130.8, -133.4, -136.0};
  // capture_db[i][j]: minimum dB advantage an SF(7+i) signal needs over an
  // SF(7+j) interferer. Co-SF 6 dB, negative inter-SF rejection thresholds;
  // literature-typical defaults, configurable.
  std::array<std::array<double, kSfCount>, kSfCount> capture_db{{
      {{6, -8, -9, -9, -9, -9}},
      {{-11, 6, -11, -12, -13, -13}},
      {{-15, -13, 6, -13, -14, -15}},
      {{-19, -18, -17, 6, -17, -18}},
      {{-22, -22, -21, -20, 6, -20}},
      {{-25, -25, -25, -24, -23, 6}},
  }};

  int mtu(SpreadingFactor sf) const { return mtu_bytes[static_cast<std::size_t>(sf.index())]; }
  double sensitivity(SpreadingFactor sf) const {
    return sensitivity_dbm[static_cast<std::size_t>(sf.index())];
  }
  double capture_threshold(SpreadingFactor signal, SpreadingFactor interferer) const {
    return capture_db[static_cast<std::size_t>(signal.index())]
                     [static_cast<std::size_t>(interferer.index())];
  }
  void validate() const;
};

// Time on air of one frame, seconds.
double airtime_s(SpreadingFactor sf, int payload_bytes, const RadioConfig& cfg,
                 const SfTables& tables);

// Received power after path loss and fading (fading is a linear power gain).
double received_power_dbm(double tx_power_dbm, double distance_m, double fading,
                          const RadioConfig& cfg);

// Block-fading power coefficient, Exp(1).
double sample_fading(Rng& rng);

bool above_sensitivity(double power_dbm, SpreadingFactor sf, const SfTables& tables);
bool capture_ok(double signal_dbm, double interferer_dbm, SpreadingFactor signal_sf,
                SpreadingFactor interferer_sf, const SfTables& tables);

}  // namespace lorafl::phy
