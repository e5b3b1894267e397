#include "lorafl/sim.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace lorafl::sim {

namespace {

double ceil_to_multiple(double value, double unit) {
  // Guard against values an ulp above an exact multiple.
  return std::ceil(value / unit - 1e-9) * unit;
}

}  // namespace

double downlink_start_time(double candidate_s, LorawanClass cls, double ping_period_s) {
  if (cls == LorawanClass::C) return candidate_s;
  if (!(ping_period_s > 0))
    throw std::invalid_argument("downlink_start_time: ping period must be positive");
  return ceil_to_multiple(candidate_s, ping_period_s);
}

double round_interval_s(int k, double frame_airtime_s, double rate,
                        double duty_cycle_max_pct, LorawanClass cls,
                        double ping_period_s) {
  if (k <= 0 || !(frame_airtime_s > 0) || !(rate > 0) || !(duty_cycle_max_pct > 0))
    throw std::invalid_argument("round_interval: arguments must be positive");
  const double delta = (k * frame_airtime_s) / (rate * duty_cycle_max_pct) * 100.0;
  if (cls == LorawanClass::B) return ceil_to_multiple(delta, ping_period_s);
  return delta;
}

std::vector<DutyViolation> audit_duty_cycle(const std::vector<TransmissionRecord>& log,
                                            double max_pct, double rel_tol) {
  std::map<int, std::vector<TransmissionRecord>> by_device;
  for (const auto& rec : log) by_device[rec.device].push_back(rec);
  std::vector<DutyViolation> violations;
  for (auto& [device, recs] : by_device) {
    std::sort(recs.begin(), recs.end(),
              [](const auto& a, const auto& b) { return a.start_s < b.start_s; });
    for (std::size_t i = 0; i + 1 < recs.size(); ++i) {
      const double window = recs[i + 1].start_s - recs[i].start_s;
      if (!(window > 0)) {
        violations.push_back({device, recs[i].start_s, recs[i + 1].start_s,
                              recs[i].airtime_s, std::numeric_limits<double>::infinity()});
        continue;
      }
      const double ratio = recs[i].airtime_s / window;
      if (ratio > max_pct / 100.0 * (1.0 + rel_tol))
        violations.push_back(
            {device, recs[i].start_s, recs[i + 1].start_s, recs[i].airtime_s, ratio});
    }
  }
  return violations;
}

Engine::Engine(const ScenarioConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      seed_(seed),
      sf_(cfg.sf),
      mlp_(cfg.train.model),
      downlink_pipeline_(cfg.codec),
      uplink_pipeline_(cfg.codec),
      sampling_rng_(stream_seed(seed, Stream::Sampling)),
      server_link_rng_(stream_seed(seed, Stream::ServerLink)) {
  cfg_.validate();

  // The downlink carries the raw global model; only the uplink may be
  // differential.
  downlink_pipeline_.differential_uplink = false;

  mtu_ = cfg_.tables.mtu(sf_);
  frame_airtime_s_ = phy::airtime_s(sf_, mtu_, cfg_.radio, cfg_.tables);

  if (cfg_.dataset.type == "synthetic") {
    Rng data_rng(stream_seed(seed, Stream::Dataset));
    auto [train, test] = fl::make_blob_datasets(cfg_.dataset.blob, data_rng);
    test_ = std::move(test);
    Rng part_rng(stream_seed(seed, Stream::Partition));
    shards_ = fl::partition_dataset(train, cfg_.topology.client_count, part_rng);
  } else {
    auto train = fl::load_idx(cfg_.dataset.idx_train_images, cfg_.dataset.idx_train_labels);
    test_ = fl::load_idx(cfg_.dataset.idx_test_images, cfg_.dataset.idx_test_labels);
    if (train.feature_dim != cfg_.train.model.input_dim)
      throw ConfigError("train.model.input_dim must match the idx feature dimension");
    Rng part_rng(stream_seed(seed, Stream::Partition));
    shards_ = fl::partition_dataset(train, cfg_.topology.client_count, part_rng);
  }

  Rng topo_rng(stream_seed(seed, Stream::Topology));
  distances_.resize(static_cast<std::size_t>(cfg_.topology.client_count));
  for (auto& d : distances_) d = cfg_.topology.radius_m * std::sqrt(topo_rng.uniform());

  global_ = fl::init_global(cfg_.train.model, stream_seed(seed, Stream::ModelInit));

  client_next_allowed_s_.assign(static_cast<std::size_t>(cfg_.topology.client_count), 0.0);
  client_link_rngs_.reserve(static_cast<std::size_t>(cfg_.topology.client_count));
  for (int i = 0; i < cfg_.topology.client_count; ++i)
    client_link_rngs_.emplace_back(
        stream_seed(seed, Stream::ClientLink, static_cast<std::uint64_t>(i)));

  if (cfg_.schedule.link_mode == LinkMode::FullSim) {
    linksim::InterfererConfig icfg = cfg_.interference.process;
    for (int i = 0; i < cfg_.topology.client_count; ++i)
      client_procs_.push_back(std::make_unique<linksim::InterfererProcess>(
          icfg, cfg_.radio, cfg_.tables,
          Rng(stream_seed(seed, Stream::ClientInterferers, static_cast<std::uint64_t>(i)))));
    server_proc_ = std::make_unique<linksim::InterfererProcess>(
        icfg, cfg_.radio, cfg_.tables, Rng(stream_seed(seed, Stream::ServerInterferers)));
  } else if (cfg_.schedule.link_mode == LinkMode::Analytical) {
    auto params = linkmodel::derive_params(
        cfg_.radio, cfg_.tables, cfg_.interference.process.density_per_m2,
        cfg_.interference.process.frames_per_hour, cfg_.interference.process.radius_m,
        cfg_.interference.gamma0_override, cfg_.interference.process.payload_bytes);
    params.sf_probability = cfg_.interference.sf_probability;
    prob_cache_ = std::make_unique<linkmodel::ProbabilityCache>(params);
  }
}

double Engine::duty_interval_after(int k, int n, bool server_side) const {
  // Eq-style interval from the source-fragment count, but never shorter than
  // what the actually transmitted airtime n*l requires (ceil(k/r) can exceed
  // k/r). Only the server's (class B) interval snaps to ping slots.
  const double dc = cfg_.schedule.duty_cycle_max_pct;
  const double spec_interval =
      (k * frame_airtime_s_) / (cfg_.codec.fec_rate * dc) * 100.0;
  const double airtime_interval = (n * frame_airtime_s_) * 100.0 / dc;
  double delta = std::max(spec_interval, airtime_interval);
  if (server_side && cfg_.schedule.lorawan_class == LorawanClass::B)
    delta = std::ceil(delta / cfg_.schedule.ping_period_s - 1e-9) * cfg_.schedule.ping_period_s;
  return delta;
}

int Engine::count_received_downlink(int client, const codec::EncodedUpdate& enc,
                                    double t0) {
  const auto ci = static_cast<std::size_t>(client);
  int got = 0;
  switch (cfg_.schedule.link_mode) {
    case LinkMode::Lossless:
      return enc.n;
    case LinkMode::Analytical: {
      const double p = prob_cache_->get(sf_, distances_[ci]);
      for (int f = 0; f < enc.n; ++f)
        if (linkmodel::bernoulli_outcome(p, client_link_rngs_[ci])) ++got;
      return got;
    }
    case LinkMode::FullSim: {
      linksim::LinkRealization real;
      for (int f = 0; f < enc.n; ++f) {
        const double start = t0 + f * frame_airtime_s_;
        const linksim::Frame frame{sf_, 0, start, frame_airtime_s_, cfg_.radio.tx_power_dbm};
        real.fading = phy::sample_fading(client_link_rngs_[ci]);
        real.overlapping.clear();
        client_procs_[ci]->collect_overlapping(start, start + frame_airtime_s_, 0,
                                               real.overlapping);
        if (linksim::frame_outcome(frame, distances_[ci], real, cfg_.tables, cfg_.radio))
          ++got;
      }
      return got;
    }
  }
  return got;
}

Engine::DownlinkResult Engine::run_downlink(int round, const std::vector<int>& sampled,
                                            const codec::EncodedUpdate& enc,
                                            RoundMetrics& rm) {
  DownlinkResult res;
  res.delivered.assign(sampled.size(), 0);
  if (round == 1) {
    // The initial model is generated locally at every device; nothing is
    // transmitted, but the round-1 slot still anchors the duty-cycle interval.
    res.start_s = downlink_start_time(std::max(0.0, server_next_allowed_s_),
                                      cfg_.schedule.lorawan_class, cfg_.schedule.ping_period_s);
    res.end_s = res.start_s;
    std::fill(res.delivered.begin(), res.delivered.end(), std::uint8_t{1});
    rm.downlink_airtime_s = 0.0;
    rm.downlink_bytes = 0;
    log_.push_back({-1, res.start_s, 0.0});
    return res;
  }
  const double candidate = std::max(server_next_allowed_s_, prev_uplink_end_s_);
  res.start_s = downlink_start_time(candidate, cfg_.schedule.lorawan_class,
                                    cfg_.schedule.ping_period_s);
  const double burst = enc.n * frame_airtime_s_;
  res.end_s = res.start_s + burst;
  rm.downlink_airtime_s = burst;
  rm.downlink_bytes = enc.byte_size();
  for (std::size_t j = 0; j < sampled.size(); ++j) {
    const int got = count_received_downlink(sampled[j], enc, res.start_s);
    res.delivered[j] = got >= enc.k ? 1 : 0;
  }
  if (cfg_.schedule.link_mode == LinkMode::FullSim)
    for (int client : sampled)
      client_procs_[static_cast<std::size_t>(client)]->release_before(res.end_s);
  log_.push_back({-1, res.start_s, burst});
  return res;
}

const RoundMetrics& Engine::run_round() {
  if (round_ >= cfg_.schedule.rounds)
    throw std::logic_error("run_round: all configured rounds already executed");
  const int t = ++round_;
  RoundMetrics rm;
  rm.round = t;
  rm.sampled = fl::sample_clients(cfg_.topology.client_count,
                                  cfg_.schedule.clients_per_round, sampling_rng_);
  const auto& sampled = rm.sampled;
  const std::size_t m = sampled.size();

  // Downlink: encode the raw global model. In round 1 the encoding only sizes
  // the enforced interval.
  const auto enc_down = codec::encode_update(global_, downlink_pipeline_, mtu_, nullptr);
  rm.downlink_k = enc_down.k;
  rm.downlink_n = enc_down.n;
  const auto down = run_downlink(t, sampled, enc_down, rm);
  rm.downlink_delivered = down.delivered;
  server_next_allowed_s_ = down.start_s + duty_interval_after(enc_down.k, enc_down.n, true);

  // What a delivered client holds: the exact model in round 1, the decoded
  // downlink afterwards.
  const fl::ParamVector reference =
      t == 1 ? global_
             : codec::decode_update(enc_down.wire, mlp_.param_count(), nullptr);

  std::vector<std::size_t> transmitters;
  for (std::size_t j = 0; j < m; ++j)
    if (down.delivered[j]) transmitters.push_back(j);

  // Local training and encoding are independent across clients; results are
  // consumed in a fixed order below.
  std::vector<fl::ParamVector> locals(m);
  std::vector<codec::EncodedUpdate> updates(m);
  std::vector<std::exception_ptr> errors(m);
  const bool differential = uplink_pipeline_.differential_uplink;
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t ti = 0; ti < static_cast<std::int64_t>(transmitters.size()); ++ti) {
    const std::size_t j = transmitters[static_cast<std::size_t>(ti)];
    const int client = sampled[j];
    try {
      Rng train_rng(stream_seed(seed_, Stream::Training, static_cast<std::uint64_t>(client),
                                static_cast<std::uint64_t>(t)));
      locals[j] = fl::local_train(mlp_, reference, shards_[static_cast<std::size_t>(client)],
                                  cfg_.train, train_rng);
      updates[j] = codec::encode_update(locals[j], uplink_pipeline_, mtu_,
                                        differential ? &reference : nullptr);
    } catch (...) {
      errors[j] = std::current_exception();
    }
  }
  for (const auto& err : errors)
    if (err) std::rethrow_exception(err);

  double uplink_start = down.end_s + cfg_.schedule.processing_delay_s;
  for (std::size_t j : transmitters)
    uplink_start =
        std::max(uplink_start, client_next_allowed_s_[static_cast<std::size_t>(sampled[j])]);

  rm.uplink_delivered.assign(m, 0);
  double max_burst = 0.0;
  for (std::size_t j : transmitters) {
    const int client = sampled[j];
    const auto ci = static_cast<std::size_t>(client);
    const auto& enc = updates[j];
    const int channel = static_cast<int>(j);  // orthogonal channel per sampled slot
    const double burst = enc.n * frame_airtime_s_;
    int got = 0;
    switch (cfg_.schedule.link_mode) {
      case LinkMode::Lossless:
        got = enc.n;
        break;
      case LinkMode::Analytical: {
        const double p = prob_cache_->get(sf_, distances_[ci]);
        for (int f = 0; f < enc.n; ++f)
          if (linkmodel::bernoulli_outcome(p, server_link_rng_)) ++got;
        break;
      }
      case LinkMode::FullSim: {
        linksim::LinkRealization real;
        for (int f = 0; f < enc.n; ++f) {
          const double start = uplink_start + f * frame_airtime_s_;
          const linksim::Frame frame{sf_, channel, start, frame_airtime_s_,
                                     cfg_.radio.tx_power_dbm};
          real.fading = phy::sample_fading(server_link_rng_);
          real.overlapping.clear();
          server_proc_->collect_overlapping(start, start + frame_airtime_s_, channel,
                                            real.overlapping);
          if (linksim::frame_outcome(frame, distances_[ci], real, cfg_.tables, cfg_.radio))
            ++got;
        }
        break;
      }
    }
    rm.uplink_delivered[j] = got >= enc.k ? 1 : 0;
    rm.cumulative_uplink_airtime_s += burst;
    max_burst = std::max(max_burst, burst);
    log_.push_back({client, uplink_start, burst});
    client_next_allowed_s_[ci] = uplink_start + duty_interval_after(enc.k, enc.n, false);
  }
  const double uplink_end = uplink_start + max_burst;
  if (cfg_.schedule.link_mode == LinkMode::FullSim && !transmitters.empty())
    server_proc_->release_before(uplink_end);
  prev_uplink_end_s_ = uplink_end;

  // Aggregate whatever arrived, in client-id order.
  std::vector<std::size_t> delivered_slots;
  for (std::size_t j : transmitters)
    if (rm.uplink_delivered[j]) delivered_slots.push_back(j);
  std::sort(delivered_slots.begin(), delivered_slots.end(),
            [&](std::size_t a, std::size_t b) { return sampled[a] < sampled[b]; });
  std::vector<std::pair<fl::ParamVector, std::size_t>> received;
  received.reserve(delivered_slots.size());
  for (std::size_t j : delivered_slots) {
    const auto ci = static_cast<std::size_t>(sampled[j]);
    received.emplace_back(codec::decode_update(updates[j].wire, mlp_.param_count(),
                                               differential ? &reference : nullptr),
                          shards_[ci].size());
  }
  if (!received.empty()) global_ = fl::fedavg(received);

  const auto eval = mlp_.evaluate(global_, test_);
  rm.accuracy = eval.accuracy;
  rm.loss = eval.loss;
  rm.completion_time_s = uplink_end;
  metrics_.push_back(std::move(rm));
  return metrics_.back();
}

std::vector<RoundMetrics> Engine::run_all() {
  while (round_ < cfg_.schedule.rounds) run_round();
  return metrics_;
}

}  // namespace lorafl::sim
