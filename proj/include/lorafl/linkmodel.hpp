#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <unordered_map>

#include "lorafl/phy.hpp"
#include "lorafl/rng.hpp"

namespace lorafl::linkmodel {

// gamma(s, x) = integral_0^x t^(s-1) e^(-t) dt, s > 0, x >= 0.
double lower_incomplete_gamma(double s, double x);

// Everything the frame-success integral needs, in one unit system:
// linear powers (mW), seconds, frames per second, linear-domain path-loss
// exponent.
struct AnalyticalParams {
  double interferer_density_per_m2 = 1e-5;       // lambda_I
  double interferer_frames_per_s = 10.0 / 3600;  // lambda_f
  double interference_radius_m = 2000.0;         // R_I
  int channel_count = 8;
  std::array<double, phy::kSfCount> sf_probability{1.0 / 6, 1.0 / 6, 1.0 / 6,
                                                   1.0 / 6, 1.0 / 6, 1.0 / 6};  // eta_j
  std::array<double, phy::kSfCount> own_airtime_s{};         // l_i, signal frame per SF
  std::array<double, phy::kSfCount> interferer_airtime_s{};  // l-bar_j
  std::array<double, phy::kSfCount> sensitivity_mw{};        // zeta_i
  std::array<std::array<double, phy::kSfCount>, phy::kSfCount> capture_ratio{};  // xi_ij
  double gamma0 = 0.0;      // linear reference gain
  double tx_power_mw = 0.0;  // p_t
  double path_loss_exponent = 2.1;  // alpha (linear domain)
  void validate() const;
};

// Builds the parameter block from the radio configuration so that the mean
// received power gamma0 * p_t * d^-alpha coincides with the dB-domain link
// budget; unless overridden, gamma0 = 10^((G_a - L_ref)/10) * d_ref^alpha.
AnalyticalParams derive_params(const phy::RadioConfig& radio, const phy::SfTables& tables,
                               double interferer_density_per_m2,
                               double interferer_frames_per_hour, double radius_m,
                               std::optional<double> gamma0_override,
                               const std::array<int, phy::kSfCount>& interferer_payload_bytes);

// Frame success probability S_i(d) by numerical integration of the fading /
// interference outage integral; clamped to [0, 1].
double success_probability(phy::SpreadingFactor sf, double distance_m,
                           const AnalyticalParams& params);

// Success iff a uniform draw R in (0, 1] satisfies R <= p.
bool bernoulli_outcome(double p, Rng& rng);

// Memoizes success_probability per (SF, mm-quantized distance) for one fixed
// parameter set. Intended use is one instance per replication.
class ProbabilityCache {
 public:
  explicit ProbabilityCache(AnalyticalParams params);
  double get(phy::SpreadingFactor sf, double distance_m);
  std::size_t computations() const { return computations_; }
  const AnalyticalParams& params() const { return params_; }

 private:
  AnalyticalParams params_;
  std::uint64_t params_fingerprint_ = 0;
  std::unordered_map<std::uint64_t, double> cache_;
  std::size_t computations_ = 0;
};

}  // namespace lorafl::linkmodel
