#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lorafl/errors.hpp"
#include "lorafl/rng.hpp"

namespace lorafl::fl {

// Flat ordered parameter vector; the unit of exchange between server and
// clients. Layout is defined by the model (see Mlp).
using ParamVector = std::vector<double>;

struct MlpConfig {
  int input_dim = 64;
  int hidden_dim = 128;
  int output_dim = 10;
  double init_scale = 1.0;  // multiplier on the Glorot-uniform limit
  std::size_t param_count() const {
    return static_cast<std::size_t>(hidden_dim) * static_cast<std::size_t>(input_dim) +
           static_cast<std::size_t>(hidden_dim) +
           static_cast<std::size_t>(output_dim) * static_cast<std::size_t>(hidden_dim) +
           static_cast<std::size_t>(output_dim);
  }
  void validate() const;
};

struct Dataset {
  int feature_dim = 0;
  std::vector<double> features;  // row-major, size() x feature_dim
  std::vector<int> labels;
  std::size_t size() const { return labels.size(); }
  void validate() const;
};

struct TrainConfig {
  int local_epochs = 1;
  int batch_size = 10;
  double learning_rate = 0.1;
  double weight_decay = 0.0;  // L2 coefficient, applied per SGD step
  MlpConfig model;
  void validate() const;
};

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;
};

// Two-layer perceptron with ReLU hidden activation and softmax cross-entropy.
// Parameter layout: [W1 (hidden x input)] [b1] [W2 (output x hidden)] [b2].
class Mlp {
 public:
  explicit Mlp(MlpConfig cfg);
  const MlpConfig& config() const { return cfg_; }
  std::size_t param_count() const { return cfg_.param_count(); }

  // Glorot-uniform weights, zero biases.
  ParamVector init_params(Rng& rng) const;

  // Mean cross-entropy loss over the index-selected batch plus its gradient.
  double loss_and_gradient(const ParamVector& params, const Dataset& data,
                           std::span<const std::size_t> batch, ParamVector& grad) const;

  EvalResult evaluate(const ParamVector& params, const Dataset& test) const;

 private:
  void forward(const ParamVector& params, std::span<const double> x, std::int64_t batch,
               std::vector<double>& hidden, std::vector<double>& logits) const;
  MlpConfig cfg_;
  std::size_t w1_ = 0, b1_ = 0, w2_ = 0, b2_ = 0;  // offsets into the flat vector
};

// Deterministic global model shared by all devices before round 1.
ParamVector init_global(const MlpConfig& cfg, std::uint64_t seed);

// Uniform sample without replacement; result in draw order.
std::vector<int> sample_clients(int client_count, int sample_size, Rng& rng);

// cfg.local_epochs of mini-batch SGD from `start`; deterministic given rng.
ParamVector local_train(const Mlp& mlp, const ParamVector& start, const Dataset& shard,
                        const TrainConfig& cfg, Rng& rng);

// Dataset-size-weighted average, summed in input order.
ParamVector fedavg(const std::vector<std::pair<ParamVector, std::size_t>>& updates);

// Equal-size (+-1) disjoint IID shards.
std::vector<Dataset> partition_dataset(const Dataset& data, int n_clients, Rng& rng);

struct BlobConfig {
  int classes = 10;
  int feature_dim = 64;
  int active_dims = 8;         // nonzero coordinates per class mean
  double mean_magnitude = 3.0;
  double noise_sigma = 1.0;
  int train_size = 2000;
  int test_size = 500;
  void validate() const;
};

// Gaussian-blob classification set; train and test share class means.
std::pair<Dataset, Dataset> make_blob_datasets(const BlobConfig& cfg, Rng& rng);

// MNIST-layout IDX files (big-endian magic + dims); pixel values scaled to [0,1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

}  // namespace lorafl::fl
