#include "lorafl/linkmodel.hpp"

#include <algorithm>
#include <functional>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <string>

#include "lorafl/errors.hpp"

namespace lorafl::linkmodel {

namespace {

constexpr int kMaxSeriesIter = 500;
constexpr int kMaxCfIter = 500;

// Regularization-free series for gamma(s, x), valid for x < s + 1.
double lower_gamma_series(double s, double x) {
  double term = 1.0 / s;
  double sum = term;
  for (int n = 1; n <= kMaxSeriesIter; ++n) {
    term *= x / (s + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-17)
      return sum * std::exp(-x + s * std::log(x));
  }
  throw NumericalError("lower_incomplete_gamma: series did not converge");
}

// Modified Lentz continued fraction for the upper gamma, valid for x >= s + 1.
double upper_gamma_cf(double s, double x) {
  const double tiny = std::numeric_limits<double>::min() / 1e-30;
  double b = x + 1.0 - s;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxCfIter; ++i) {
    const double an = -i * (i - s);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) <= 1e-16) return std::exp(-x + s * std::log(x)) * h;
  }
  throw NumericalError("lower_incomplete_gamma: continued fraction did not converge");
}

// Adaptive Simpson with an absolute tolerance; throws when the recursion
// bottoms out before the tolerance is met.
struct Quadrature {
  const std::function<double(double)>& f;
  int evals = 0;

  double simpson(double a, double fa, double fm, double b, double fb) const {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  }

  double adapt(double a, double fa, double m, double fm, double b, double fb,
               double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    evals += 2;
    const double left = simpson(a, fa, flm, m, fm);
    const double right = simpson(m, fm, frm, b, fb);
    const double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    if (depth <= 0)
      throw NumericalError("success_probability: quadrature did not converge");
    return adapt(a, fa, lm, flm, m, fm, left, 0.5 * tol, depth - 1) +
           adapt(m, fm, rm, frm, b, fb, right, 0.5 * tol, depth - 1);
  }

  double integrate(double a, double b, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double fa = f(a);
    const double fm = f(m);
    const double fb = f(b);
    evals += 3;
    return adapt(a, fa, m, fm, b, fb, simpson(a, fa, fm, b, fb), tol, depth);
  }
};

double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace

double lower_incomplete_gamma(double s, double x) {
  if (!(s > 0) || !std::isfinite(s))
    throw std::invalid_argument("lower_incomplete_gamma: s must be positive and finite");
  if (!(x >= 0) || !std::isfinite(x))
    throw std::invalid_argument("lower_incomplete_gamma: x must be nonnegative and finite");
  if (x == 0.0) return 0.0;
  if (x < s + 1.0) return lower_gamma_series(s, x);
  const double upper = upper_gamma_cf(s, x);
  return std::tgamma(s) - upper;
}

void AnalyticalParams::validate() const {
  if (!(interferer_density_per_m2 >= 0))
    throw ConfigError("analytical: interferer density must be nonnegative");
  if (!(interferer_frames_per_s >= 0))
    throw ConfigError("analytical: frame rate must be nonnegative");
  if (!(interference_radius_m > 0))
    throw ConfigError("analytical: interference radius must be positive");
  if (channel_count < 1) throw ConfigError("analytical: channel count must be >= 1");
  if (!(path_loss_exponent > 0))
    throw ConfigError("analytical: path-loss exponent must be positive");
  if (!(gamma0 > 0)) throw ConfigError("analytical: gamma0 must be positive");
  if (!(tx_power_mw > 0)) throw ConfigError("analytical: tx power must be positive");
  double eta_sum = 0.0;
  for (int j = 0; j < phy::kSfCount; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    if (!(sf_probability[ju] >= 0)) throw ConfigError("analytical: eta must be nonnegative");
    eta_sum += sf_probability[ju];
    if (!(own_airtime_s[ju] > 0) || !(interferer_airtime_s[ju] > 0))
      throw ConfigError("analytical: frame durations must be positive");
    if (!(sensitivity_mw[ju] > 0))
      throw ConfigError("analytical: sensitivities must be positive");
    for (int i = 0; i < phy::kSfCount; ++i)
      if (!(capture_ratio[static_cast<std::size_t>(i)][ju] > 0))
        throw ConfigError("analytical: capture ratios must be positive");
  }
  if (std::abs(eta_sum - 1.0) > 1e-9)
    throw ConfigError("analytical: eta must sum to 1");
}

AnalyticalParams derive_params(const phy::RadioConfig& radio, const phy::SfTables& tables,
                               double interferer_density_per_m2,
                               double interferer_frames_per_hour, double radius_m,
                               std::optional<double> gamma0_override,
                               const std::array<int, phy::kSfCount>& interferer_payload_bytes) {
  radio.validate();
  tables.validate();
  AnalyticalParams p;
  p.interferer_density_per_m2 = interferer_density_per_m2;
  p.interferer_frames_per_s = interferer_frames_per_hour / 3600.0;
  p.interference_radius_m = radius_m;
  p.channel_count = radio.channel_count;
  p.path_loss_exponent = radio.linear_path_loss_exponent();
  p.tx_power_mw = dbm_to_mw(radio.tx_power_dbm);
  p.gamma0 = gamma0_override.value_or(
      db_to_linear(radio.antenna_gain_db - radio.ref_loss_db) *
      std::pow(radio.ref_distance_m, p.path_loss_exponent));
  for (auto sf : phy::all_spreading_factors()) {
    const auto i = static_cast<std::size_t>(sf.index());
    p.own_airtime_s[i] = phy::airtime_s(sf, tables.mtu(sf), radio, tables);
    p.interferer_airtime_s[i] =
        phy::airtime_s(sf, interferer_payload_bytes[i], radio, tables);
    p.sensitivity_mw[i] = dbm_to_mw(tables.sensitivity(sf));
    for (int j = 0; j < phy::kSfCount; ++j)
      p.capture_ratio[i][static_cast<std::size_t>(j)] =
          db_to_linear(tables.capture_db[i][static_cast<std::size_t>(j)]);
  }
  p.validate();
  return p;
}

double success_probability(phy::SpreadingFactor sf, double distance_m,
                           const AnalyticalParams& p) {
  if (!(distance_m > 0))
    throw std::invalid_argument("success_probability: distance must be positive");
  const auto i = static_cast<std::size_t>(sf.index());
  const double alpha = p.path_loss_exponent;
  const double d_pow = std::pow(distance_m, alpha);
  const double a0 = p.sensitivity_mw[i] * d_pow / (p.gamma0 * p.tx_power_mw);
  const double radius = p.interference_radius_m;
  const double n_bar = p.interferer_density_per_m2 * std::numbers::pi * radius * radius;
  const double coef =
      2.0 * p.interferer_frames_per_s / (alpha * radius * radius * p.channel_count);
  const double r_pow = std::pow(radius, alpha);
  const double s_exp = 2.0 / alpha;

  // Substituting a = a0 + u factors out e^-a0 and keeps the integrand O(1).
  // The tail beyond u = 40 is below e^-40 of the remaining mass.
  const std::function<double(double)> integrand = [&](double u) {
    const double a = a0 + u;
    double sum = 0.0;
    for (int j = 0; j < phy::kSfCount; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      if (p.sf_probability[ju] == 0.0) continue;
      const double beta = a / (p.capture_ratio[i][ju] * d_pow);
      const double g = lower_incomplete_gamma(s_exp, beta * r_pow);
      sum += (p.own_airtime_s[i] + p.interferer_airtime_s[ju]) * p.sf_probability[ju] *
             std::pow(beta, -s_exp) * g;
    }
    const double bracket = std::clamp(1.0 - coef * sum, 0.0, 1.0);
    return std::pow(bracket, n_bar) * std::exp(-u);
  };

  Quadrature quad{integrand};
  const double integral = quad.integrate(0.0, 40.0, 1e-11, 48);
  const double p_success = std::exp(-a0) * integral;
  if (!std::isfinite(p_success))
    throw NumericalError("success_probability: non-finite result");
  return std::clamp(p_success, 0.0, 1.0);
}

bool bernoulli_outcome(double p, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("bernoulli_outcome: p must be in [0, 1]");
  return rng.uniform_pos() <= p;
}

ProbabilityCache::ProbabilityCache(AnalyticalParams params) : params_(params) {
  params_.validate();
  // Fingerprint of the parameter block; folded into the key so entries from a
  // stale parameter set can never alias.
  const auto* bytes = reinterpret_cast<const unsigned char*>(&params_);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t b = 0; b < sizeof(params_); ++b) {
    h ^= bytes[b];
    h *= 0x100000001b3ULL;
  }
  params_fingerprint_ = h;
}

double ProbabilityCache::get(phy::SpreadingFactor sf, double distance_m) {
  const auto mm = static_cast<std::uint64_t>(std::llround(distance_m * 1000.0));
  const std::uint64_t key =
      (static_cast<std::uint64_t>(sf.index()) << 56) ^ mm ^ (params_fingerprint_ << 8);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  const double p = success_probability(sf, static_cast<double>(mm) / 1000.0, params_);
  ++computations_;
  cache_.emplace(key, p);
  return p;
}

}  // namespace lorafl::linkmodel
