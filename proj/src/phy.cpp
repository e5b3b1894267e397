#include "lorafl/phy.hpp"

#include <cmath>
#include <string>

namespace lorafl::phy {

void RadioConfig::validate() const {
  if (!(bandwidth_hz > 0)) throw ConfigError("radio.bandwidth_hz must be positive");
  if (coding_rate_index < 1 || coding_rate_index > 4)
    throw ConfigError("radio.coding_rate_index must be in 1..4");
  if (preamble_symbols < 1) throw ConfigError("radio.preamble_symbols must be positive");
  if (!(path_loss_exponent > 0)) throw ConfigError("radio.path_loss_exponent must be positive");
  if (!(ref_distance_m > 0)) throw ConfigError("radio.ref_distance_m must be positive");
  if (channel_count < 1) throw ConfigError("radio.channel_count must be >= 1");
}

void SfTables::validate() const {
  for (int i = 0; i < kSfCount; ++i) {
    if (mtu_bytes[static_cast<std::size_t>(i)] < 1)
      throw ConfigError("tables.mtu must be positive");
    if (!std::isfinite(sensitivity_dbm[static_cast<std::size_t>(i)]))
      throw ConfigError("tables.sensitivity_dbm must be finite");
    if (i > 0 && !(sensitivity_dbm[static_cast<std::size_t>(i)] <
                   sensitivity_dbm[static_cast<std::size_t>(i - 1)]))
      throw ConfigError("tables.sensitivity_dbm must be strictly decreasing in SF");
    for (int j = 0; j < kSfCount; ++j)
      if (!std::isfinite(capture_db[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]))
        throw ConfigError("tables.capture_db must be finite");
  }
}

double RadioConfig::path_loss_db(double distance_m) const {
  return ref_loss_db + path_loss_slope_db_per_decade() * std::log10(distance_m / ref_distance_m);
}

double airtime_s(SpreadingFactor sf, int payload_bytes, const RadioConfig& cfg,
                 const SfTables& tables) {
  if (payload_bytes <= 0)
    throw std::invalid_argument("airtime: payload must be at least 1 byte");
  if (payload_bytes > tables.mtu(sf))
    throw FragmentationRequired("airtime: payload of " + std::to_string(payload_bytes) +
                                " bytes exceeds MTU " + std::to_string(tables.mtu(sf)) +
                                " at SF" + std::to_string(sf.value()) +
                                "; fragmentation required");
  const double t_sym = static_cast<double>(1 << sf.value()) / cfg.bandwidth_hz;
  const double preamble_s = (cfg.preamble_symbols + 4.25) * t_sym;
  const int header = cfg.explicit_header ? 0 : 1;
  const int de = cfg.low_data_rate_optimize[static_cast<std::size_t>(sf.index())] ? 1 : 0;
  const int numerator = 8 * payload_bytes - 4 * sf.value() + 28 + 16 - 20 * header;
  const int denominator = 4 * (sf.value() - 2 * de);
  const int extra = static_cast<int>(std::ceil(static_cast<double>(numerator) / denominator)) *
                    (cfg.coding_rate_index + 4);
  const int payload_symbols = 8 + std::max(extra, 0);
  return preamble_s + payload_symbols * t_sym;
}

double received_power_dbm(double tx_power_dbm, double distance_m, double fading,
                          const RadioConfig& cfg) {
  if (!(distance_m > 0))
    throw std::invalid_argument("received_power: distance must be positive");
  if (!(fading > 0))
    throw std::invalid_argument("received_power: fading coefficient must be positive");
  return tx_power_dbm - cfg.path_loss_db(distance_m) + cfg.antenna_gain_db +
         10.0 * std::log10(fading);
}

double sample_fading(Rng& rng) { return rng.exponential(1.0); }

bool above_sensitivity(double power_dbm, SpreadingFactor sf, const SfTables& tables) {
  return power_dbm >= tables.sensitivity(sf);
}

bool capture_ok(double signal_dbm, double interferer_dbm, SpreadingFactor signal_sf,
                SpreadingFactor interferer_sf, const SfTables& tables) {
  return signal_dbm - interferer_dbm >= tables.capture_threshold(signal_sf, interferer_sf);
}

}  // namespace lorafl::phy
