#include "lorafl/fl.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "lorafl/kernels.hpp"

namespace lorafl::fl {

void MlpConfig::validate() const {
  if (input_dim < 1 || hidden_dim < 1 || output_dim < 2)
    throw ConfigError("train.model dims must be positive (output_dim >= 2)");
  if (!(init_scale > 0)) throw ConfigError("train.model.init_scale must be positive");
}

void Dataset::validate() const {
  if (feature_dim < 1) throw ConfigError("dataset.feature_dim must be positive");
  if (features.size() != size() * static_cast<std::size_t>(feature_dim))
    throw ConfigError("dataset feature/label sizes inconsistent");
}

void TrainConfig::validate() const {
  if (local_epochs < 1) throw ConfigError("train.local_epochs must be positive");
  if (batch_size < 1) throw ConfigError("train.batch_size must be positive");
  if (!(learning_rate >= 0)) throw ConfigError("train.learning_rate must be nonnegative");
  if (!(weight_decay >= 0)) throw ConfigError("train.weight_decay must be nonnegative");
  model.validate();
}

Mlp::Mlp(MlpConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  const auto in = static_cast<std::size_t>(cfg_.input_dim);
  const auto hid = static_cast<std::size_t>(cfg_.hidden_dim);
  const auto out = static_cast<std::size_t>(cfg_.output_dim);
  w1_ = 0;
  b1_ = hid * in;
  w2_ = b1_ + hid;
  b2_ = w2_ + out * hid;
}

ParamVector Mlp::init_params(Rng& rng) const {
  ParamVector p(param_count(), 0.0);
  const double lim1 = cfg_.init_scale * std::sqrt(6.0 / (cfg_.input_dim + cfg_.hidden_dim));
  const double lim2 = cfg_.init_scale * std::sqrt(6.0 / (cfg_.hidden_dim + cfg_.output_dim));
  for (std::size_t i = w1_; i < b1_; ++i) p[i] = rng.uniform(-lim1, lim1);
  for (std::size_t i = w2_; i < b2_; ++i) p[i] = rng.uniform(-lim2, lim2);
  return p;
}

void Mlp::forward(const ParamVector& params, std::span<const double> x,
                  std::int64_t batch, std::vector<double>& hidden,
                  std::vector<double>& logits) const {
  namespace k = kernels::par;
  const auto in = static_cast<std::int64_t>(cfg_.input_dim);
  const auto hid = static_cast<std::int64_t>(cfg_.hidden_dim);
  const auto out = static_cast<std::int64_t>(cfg_.output_dim);
  hidden.resize(static_cast<std::size_t>(batch * hid));
  logits.resize(static_cast<std::size_t>(batch * out));
  k::linear_forward(x, batch, in, std::span(params).subspan(w1_, static_cast<std::size_t>(hid * in)),
                    std::span(params).subspan(b1_, static_cast<std::size_t>(hid)), hid, hidden);
  k::relu(hidden);
  k::linear_forward(hidden, batch, hid,
                    std::span(params).subspan(w2_, static_cast<std::size_t>(out * hid)),
                    std::span(params).subspan(b2_, static_cast<std::size_t>(out)), out, logits);
}

double Mlp::loss_and_gradient(const ParamVector& params, const Dataset& data,
                              std::span<const std::size_t> batch, ParamVector& grad) const {
  if (params.size() != param_count())
    throw std::invalid_argument("loss_and_gradient: parameter size mismatch");
  if (batch.empty()) throw std::invalid_argument("loss_and_gradient: empty batch");
  namespace k = kernels::par;
  const auto in = static_cast<std::int64_t>(cfg_.input_dim);
  const auto hid = static_cast<std::int64_t>(cfg_.hidden_dim);
  const auto out = static_cast<std::int64_t>(cfg_.output_dim);
  const auto bs = static_cast<std::int64_t>(batch.size());

  std::vector<double> x(static_cast<std::size_t>(bs * in));
  std::vector<int> y(batch.size());
  for (std::size_t s = 0; s < batch.size(); ++s) {
    std::memcpy(&x[s * static_cast<std::size_t>(in)],
                &data.features[batch[s] * static_cast<std::size_t>(in)],
                static_cast<std::size_t>(in) * sizeof(double));
    y[s] = data.labels[batch[s]];
  }

  std::vector<double> hidden, logits;
  forward(params, x, bs, hidden, logits);

  std::vector<double> dlogits(logits.size());
  std::vector<double> losses(batch.size());
  k::softmax_xent(logits, y, bs, out, dlogits, losses);
  const double loss = kernels::serial::sum(losses) / static_cast<double>(bs);
  k::scale(1.0 / static_cast<double>(bs), dlogits);

  grad.assign(param_count(), 0.0);
  auto g = std::span(grad);
  k::linear_backward_weights(dlogits, hidden, bs, out, hid,
                             g.subspan(w2_, static_cast<std::size_t>(out * hid)));
  k::linear_backward_bias(dlogits, bs, out, g.subspan(b2_, static_cast<std::size_t>(out)));
  std::vector<double> dhidden(hidden.size());
  k::linear_backward_input(dlogits, std::span(params).subspan(w2_, static_cast<std::size_t>(out * hid)),
                           bs, out, hid, dhidden);
  k::relu_backward(hidden, dhidden);
  k::linear_backward_weights(dhidden, x, bs, hid, in,
                             g.subspan(w1_, static_cast<std::size_t>(hid * in)));
  k::linear_backward_bias(dhidden, bs, hid, g.subspan(b1_, static_cast<std::size_t>(hid)));
  return loss;
}

EvalResult Mlp::evaluate(const ParamVector& params, const Dataset& test) const {
  if (test.size() == 0) throw std::invalid_argument("evaluate: empty test set");
  test.validate();
  if (test.feature_dim != cfg_.input_dim)
    throw std::invalid_argument("evaluate: feature dim mismatch");
  const auto out = static_cast<std::int64_t>(cfg_.output_dim);
  const std::size_t chunk = 512;
  std::vector<double> hidden, logits, losses;
  std::size_t correct = 0;
  double loss_sum = 0.0;
  std::vector<int> y;
  std::vector<double> dlogits;
  for (std::size_t off = 0; off < test.size(); off += chunk) {
    const std::size_t bs = std::min(chunk, test.size() - off);
    auto x = std::span(test.features)
                 .subspan(off * static_cast<std::size_t>(cfg_.input_dim),
                          bs * static_cast<std::size_t>(cfg_.input_dim));
    forward(params, x, static_cast<std::int64_t>(bs), hidden, logits);
    y.assign(test.labels.begin() + static_cast<std::ptrdiff_t>(off),
             test.labels.begin() + static_cast<std::ptrdiff_t>(off + bs));
    dlogits.resize(logits.size());
    losses.resize(bs);
    kernels::par::softmax_xent(logits, y, static_cast<std::int64_t>(bs), out, dlogits, losses);
    loss_sum += kernels::serial::sum(losses);
    for (std::size_t s = 0; s < bs; ++s) {
      const double* row = &logits[s * static_cast<std::size_t>(out)];
      int arg = 0;
      for (int c = 1; c < cfg_.output_dim; ++c)
        if (row[c] > row[arg]) arg = c;
      if (arg == y[s]) ++correct;
    }
  }
  return {static_cast<double>(correct) / static_cast<double>(test.size()),
          loss_sum / static_cast<double>(test.size())};
}

ParamVector init_global(const MlpConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return Mlp(cfg).init_params(rng);
}

std::vector<int> sample_clients(int client_count, int sample_size, Rng& rng) {
  if (sample_size < 1 || sample_size > client_count)
    throw std::invalid_argument("sample_clients: need 1 <= m <= client count");
  return rng.sample_without_replacement(client_count, sample_size);
}

ParamVector local_train(const Mlp& mlp, const ParamVector& start, const Dataset& shard,
                        const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  shard.validate();
  if (shard.size() == 0) throw std::invalid_argument("local_train: empty shard");
  ParamVector params = start;
  ParamVector grad;
  std::vector<std::size_t> order(shard.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t off = 0; off < order.size(); off += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t bs =
          std::min(static_cast<std::size_t>(cfg.batch_size), order.size() - off);
      const double loss =
          mlp.loss_and_gradient(params, shard, std::span(order).subspan(off, bs), grad);
      if (!std::isfinite(loss))
        throw TrainingDivergence("local_train: loss is not finite");
      if (cfg.weight_decay > 0.0)
        kernels::par::scale(1.0 - cfg.learning_rate * cfg.weight_decay, params);
      kernels::par::axpy(-cfg.learning_rate, grad, params);
    }
  }
  return params;
}

ParamVector fedavg(const std::vector<std::pair<ParamVector, std::size_t>>& updates) {
  if (updates.empty()) throw std::invalid_argument("fedavg: no updates to aggregate");
  const std::size_t dim = updates.front().first.size();
  std::size_t total = 0;
  for (const auto& [v, w] : updates) {
    if (v.size() != dim) throw std::invalid_argument("fedavg: length mismatch");
    total += w;
  }
  if (total == 0) throw std::invalid_argument("fedavg: zero total weight");
  ParamVector out(dim, 0.0);
  for (const auto& [v, w] : updates) {
    const double weight = static_cast<double>(w) / static_cast<double>(total);
    kernels::par::axpy(weight, v, out);
  }
  for (double x : out)
    if (!std::isfinite(x)) throw NumericalError("fedavg: non-finite aggregate");
  return out;
}

std::vector<Dataset> partition_dataset(const Dataset& data, int n_clients, Rng& rng) {
  data.validate();
  if (n_clients < 1 || static_cast<std::size_t>(n_clients) > data.size())
    throw std::invalid_argument("partition_dataset: need 1 <= n <= dataset size");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  const std::size_t base = data.size() / static_cast<std::size_t>(n_clients);
  const std::size_t extra = data.size() % static_cast<std::size_t>(n_clients);
  std::vector<Dataset> shards(static_cast<std::size_t>(n_clients));
  std::size_t pos = 0;
  for (std::size_t i = 0; i < shards.size(); ++i) {
    const std::size_t count = base + (i < extra ? 1 : 0);
    auto& shard = shards[i];
    shard.feature_dim = data.feature_dim;
    shard.labels.reserve(count);
    shard.features.reserve(count * static_cast<std::size_t>(data.feature_dim));
    for (std::size_t s = 0; s < count; ++s, ++pos) {
      const std::size_t idx = order[pos];
      shard.labels.push_back(data.labels[idx]);
      const auto* row = &data.features[idx * static_cast<std::size_t>(data.feature_dim)];
      shard.features.insert(shard.features.end(), row, row + data.feature_dim);
    }
  }
  return shards;
}

void BlobConfig::validate() const {
  if (classes < 2) throw ConfigError("dataset.classes must be >= 2");
  if (feature_dim < 1) throw ConfigError("dataset.feature_dim must be positive");
  if (active_dims < 1 || active_dims > feature_dim)
    throw ConfigError("dataset.active_dims must be in [1, feature_dim]");
  if (!(noise_sigma >= 0)) throw ConfigError("dataset.noise_sigma must be nonnegative");
  if (train_size < 1 || test_size < 1)
    throw ConfigError("dataset sizes must be positive");
}

std::pair<Dataset, Dataset> make_blob_datasets(const BlobConfig& cfg, Rng& rng) {
  cfg.validate();
  // Class means: a few strong coordinates, the rest zero, so that trained
  // models end up with a wide dynamic range across weights.
  std::vector<double> means(static_cast<std::size_t>(cfg.classes) *
                                static_cast<std::size_t>(cfg.feature_dim),
                            0.0);
  for (int c = 0; c < cfg.classes; ++c) {
    const auto dims = rng.sample_without_replacement(cfg.feature_dim, cfg.active_dims);
    for (int d : dims) {
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      means[static_cast<std::size_t>(c) * static_cast<std::size_t>(cfg.feature_dim) +
            static_cast<std::size_t>(d)] = sign * cfg.mean_magnitude;
    }
  }
  auto draw = [&](int count) {
    Dataset ds;
    ds.feature_dim = cfg.feature_dim;
    ds.labels.reserve(static_cast<std::size_t>(count));
    ds.features.reserve(static_cast<std::size_t>(count) *
                        static_cast<std::size_t>(cfg.feature_dim));
    for (int s = 0; s < count; ++s) {
      const int label = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(cfg.classes)));
      ds.labels.push_back(label);
      const auto* mu = &means[static_cast<std::size_t>(label) *
                              static_cast<std::size_t>(cfg.feature_dim)];
      for (int d = 0; d < cfg.feature_dim; ++d)
        ds.features.push_back(mu[d] + rng.normal(0.0, cfg.noise_sigma));
    }
    return ds;
  };
  Dataset train = draw(cfg.train_size);
  Dataset test = draw(cfg.test_size);
  return {std::move(train), std::move(test)};
}

namespace {

std::uint32_t read_u32be(std::ifstream& f, const std::string& path) {
  unsigned char b[4];
  if (!f.read(reinterpret_cast<char*>(b), 4))
    throw CodecError("idx file truncated: " + path);
  return static_cast<std::uint32_t>(b[0]) << 24 | static_cast<std::uint32_t>(b[1]) << 16 |
         static_cast<std::uint32_t>(b[2]) << 8 | static_cast<std::uint32_t>(b[3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw ConfigError("cannot open idx image file: " + images_path);
  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw ConfigError("cannot open idx label file: " + labels_path);

  if (read_u32be(imgs, images_path) != 0x00000803u)
    throw CodecError("bad idx image magic: " + images_path);
  const std::uint32_t n_images = read_u32be(imgs, images_path);
  const std::uint32_t rows = read_u32be(imgs, images_path);
  const std::uint32_t cols = read_u32be(imgs, images_path);

  if (read_u32be(labs, labels_path) != 0x00000801u)
    throw CodecError("bad idx label magic: " + labels_path);
  const std::uint32_t n_labels = read_u32be(labs, labels_path);
  if (n_images != n_labels)
    throw CodecError("idx image/label counts differ");

  Dataset ds;
  ds.feature_dim = static_cast<int>(rows * cols);
  ds.labels.resize(n_labels);
  ds.features.resize(static_cast<std::size_t>(n_images) * rows * cols);
  std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols);
  for (std::uint32_t i = 0; i < n_images; ++i) {
    if (!imgs.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
      throw CodecError("idx image data truncated: " + images_path);
    for (std::size_t p = 0; p < buf.size(); ++p)
      ds.features[static_cast<std::size_t>(i) * buf.size() + p] = buf[p] / 255.0;
    unsigned char lab;
    if (!labs.read(reinterpret_cast<char*>(&lab), 1))
      throw CodecError("idx label data truncated: " + labels_path);
    ds.labels[i] = lab;
  }
  return ds;
}

}  // namespace lorafl::fl
