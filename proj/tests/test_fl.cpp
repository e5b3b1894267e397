#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "doctest.h"
#include "lorafl/fl.hpp"

using namespace lorafl;
using namespace lorafl::fl;

namespace {

Dataset tiny_separable() {
  // Two well-separated 2-D blobs.
  Dataset ds;
  ds.feature_dim = 2;
  for (int i = 0; i < 20; ++i) {
    const int label = i % 2;
    const double base = label == 0 ? -2.0 : 2.0;
    ds.features.push_back(base + 0.01 * i);
    ds.features.push_back(base - 0.01 * i);
    ds.labels.push_back(label);
  }
  return ds;
}

double dataset_loss(const Mlp& mlp, const ParamVector& params, const Dataset& ds) {
  return mlp.evaluate(params, ds).loss;
}

}  // namespace

TEST_CASE("init_global is deterministic per seed and centered") {
  MlpConfig cfg;
  const auto a = init_global(cfg, 42);
  const auto b = init_global(cfg, 42);
  const auto c = init_global(cfg, 43);
  CHECK(a == b);
  CHECK(a != c);
  CHECK(a.size() == cfg.param_count());
  const double mean = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
  CHECK(std::abs(mean) < 0.01);
}

TEST_CASE("sample_clients: extremes, determinism, frequencies") {
  Rng rng(1);
  auto all = sample_clients(5, 5, rng);
  std::sort(all.begin(), all.end());
  CHECK(all == std::vector<int>{0, 1, 2, 3, 4});

  Rng r1(7), r2(7);
  CHECK(sample_clients(20, 1, r1) == sample_clients(20, 1, r2));

  CHECK_THROWS_AS(sample_clients(5, 6, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_clients(5, 0, rng), std::invalid_argument);

  const int n = 20, m = 8, rounds = 10000;
  std::vector<int> hits(n, 0);
  Rng freq_rng(99);
  for (int t = 0; t < rounds; ++t) {
    for (int id : sample_clients(n, m, freq_rng)) {
      ++hits[static_cast<std::size_t>(id)];
      CHECK(id >= 0);
      CHECK(id < n);
    }
  }
  for (int id = 0; id < n; ++id)
    CHECK(static_cast<double>(hits[static_cast<std::size_t>(id)]) / rounds ==
          doctest::Approx(static_cast<double>(m) / n).epsilon(0.02));
}

TEST_CASE("local_train with zero learning rate returns the input model") {
  MlpConfig mcfg{2, 6, 2};
  Mlp mlp(mcfg);
  Rng init_rng(3);
  const auto start = mlp.init_params(init_rng);
  TrainConfig cfg;
  cfg.model = mcfg;
  cfg.learning_rate = 0.0;
  cfg.local_epochs = 2;
  Rng rng(5);
  CHECK(local_train(mlp, start, tiny_separable(), cfg, rng) == start);
}

TEST_CASE("one epoch on a separable shard strictly decreases the loss") {
  MlpConfig mcfg{2, 8, 2};
  Mlp mlp(mcfg);
  Rng init_rng(11);
  const auto start = mlp.init_params(init_rng);
  const auto shard = tiny_separable();
  TrainConfig cfg;
  cfg.model = mcfg;
  cfg.learning_rate = 0.1;
  cfg.local_epochs = 1;
  cfg.batch_size = 5;
  Rng rng(13);
  const auto trained = local_train(mlp, start, shard, cfg, rng);
  CHECK(dataset_loss(mlp, trained, shard) < dataset_loss(mlp, start, shard));
}

TEST_CASE("analytic gradient matches central finite differences") {
  MlpConfig mcfg{3, 5, 3};
  Mlp mlp(mcfg);
  Rng rng(17);
  auto params = mlp.init_params(rng);
  Dataset batch;
  batch.feature_dim = 3;
  for (int s = 0; s < 3; ++s) {
    for (int f = 0; f < 3; ++f) batch.features.push_back(rng.uniform(-1, 1));
    batch.labels.push_back(static_cast<int>(rng.uniform_int(3)));
  }
  std::vector<std::size_t> idx{0, 1, 2};
  ParamVector grad;
  mlp.loss_and_gradient(params, batch, idx, grad);

  ParamVector dummy;
  const double h = 1e-6;
  double max_rel = 0.0;
  for (std::size_t i = 0; i < params.size(); i += 7) {  // stride keeps it quick
    auto perturbed = params;
    perturbed[i] = params[i] + h;
    const double up = mlp.loss_and_gradient(perturbed, batch, idx, dummy);
    perturbed[i] = params[i] - h;
    const double down = mlp.loss_and_gradient(perturbed, batch, idx, dummy);
    const double fd = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
    max_rel = std::max(max_rel, std::abs(fd - grad[i]) / denom);
  }
  CHECK(max_rel <= 1e-4);
}

TEST_CASE("fedavg: identity, arithmetic mean, weighted mean, brute-force oracle") {
  const ParamVector a{1.0, 1.0}, b{3.0, 3.0};
  CHECK(fedavg({{a, 4}}) == a);
  CHECK(fedavg({{a, 2}, {b, 2}}) == ParamVector{2.0, 2.0});
  CHECK(fedavg({{ParamVector{0.0, 0.0}, 1}, {ParamVector{4.0, 4.0}, 3}}) ==
        ParamVector{3.0, 3.0});
  CHECK_THROWS_AS(fedavg({}), std::invalid_argument);
  CHECK_THROWS_AS(fedavg({{a, 1}, {ParamVector{1.0}, 1}}), std::invalid_argument);

  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t dim = 1 + rng.uniform_int(32);
    const std::size_t count = 1 + rng.uniform_int(8);
    std::vector<std::pair<ParamVector, std::size_t>> updates(count);
    for (auto& [v, w] : updates) {
      v.resize(dim);
      for (auto& x : v) x = rng.uniform(-5, 5);
      w = 1 + rng.uniform_int(100);
    }
    const auto got = fedavg(updates);
    for (std::size_t j = 0; j < dim; ++j) {
      long double num = 0.0L, den = 0.0L;
      for (const auto& [v, w] : updates) {
        num += static_cast<long double>(v[j]) * static_cast<long double>(w);
        den += static_cast<long double>(w);
      }
      const double want = static_cast<double>(num / den);
      CHECK(std::abs(got[j] - want) <= 1e-12 * std::max(1.0, std::abs(want)));
    }
  }
}

TEST_CASE("evaluate: degenerate and perfect models") {
  MlpConfig mcfg{2, 4, 2};
  Mlp mlp(mcfg);
  const auto shard = tiny_separable();

  // All-zero parameters emit identical logits; argmax falls back to class 0.
  ParamVector zeros(mcfg.param_count(), 0.0);
  const auto r = mlp.evaluate(zeros, shard);
  CHECK(r.accuracy == doctest::Approx(0.5).epsilon(1e-12));

  TrainConfig cfg;
  cfg.model = mcfg;
  cfg.learning_rate = 0.2;
  cfg.local_epochs = 50;
  Rng rng(29), init_rng(31);
  const auto trained = local_train(mlp, mlp.init_params(init_rng), shard, cfg, rng);
  CHECK(mlp.evaluate(trained, shard).accuracy == doctest::Approx(1.0));

  Dataset empty;
  empty.feature_dim = 2;
  CHECK_THROWS_AS(mlp.evaluate(zeros, empty), std::invalid_argument);
}

TEST_CASE("partition_dataset: sizes, disjoint union, determinism") {
  Rng data_rng(37);
  BlobConfig bcfg;
  bcfg.classes = 4;
  bcfg.feature_dim = 3;
  bcfg.active_dims = 2;
  bcfg.train_size = 100;
  bcfg.test_size = 10;
  auto [train, test] = make_blob_datasets(bcfg, data_rng);

  Rng rng(41);
  const auto shards = partition_dataset(train, 20, rng);
  CHECK(shards.size() == 20);
  std::size_t total = 0;
  std::multiset<double> seen, original;
  for (const auto& s : shards) {
    CHECK(s.size() == 5);
    total += s.size();
    for (double f : s.features) seen.insert(f);
  }
  CHECK(total == train.size());
  for (double f : train.features) original.insert(f);
  CHECK(seen == original);  // union == dataset, disjoint by construction

  Rng r1(43), r2(43);
  const auto p1 = partition_dataset(train, 7, r1);
  const auto p2 = partition_dataset(train, 7, r2);
  for (std::size_t i = 0; i < p1.size(); ++i) {
    CHECK(p1[i].labels == p2[i].labels);
    CHECK(p1[i].features == p2[i].features);
  }
}

TEST_CASE("blob datasets are deterministic and learnable") {
  BlobConfig cfg;
  cfg.train_size = 400;
  cfg.test_size = 200;
  Rng r1(47), r2(47);
  const auto [train1, test1] = make_blob_datasets(cfg, r1);
  const auto [train2, test2] = make_blob_datasets(cfg, r2);
  CHECK(train1.features == train2.features);
  CHECK(test1.labels == test2.labels);

  MlpConfig mcfg{cfg.feature_dim, 32, cfg.classes};
  Mlp mlp(mcfg);
  TrainConfig tcfg;
  tcfg.model = mcfg;
  tcfg.learning_rate = 0.1;
  tcfg.local_epochs = 5;
  Rng train_rng(53), init_rng(59);
  const auto trained = local_train(mlp, mlp.init_params(init_rng), train1, tcfg, train_rng);
  CHECK(mlp.evaluate(trained, test1).accuracy > 0.9);
}

TEST_CASE("IDX ingestion round-trips a crafted file pair") {
  const char* img_path = "idx_test_images.bin";
  const char* lab_path = "idx_test_labels.bin";
  {
    std::ofstream img(img_path, std::ios::binary);
    const unsigned char header[16] = {0, 0, 8, 3, 0, 0, 0, 2,  // magic 0x803, 2 images
                                      0, 0, 0, 2, 0, 0, 0, 2}; // 2x2 pixels
    img.write(reinterpret_cast<const char*>(header), 16);
    const unsigned char pixels[8] = {0, 51, 102, 153, 204, 255, 0, 255};
    img.write(reinterpret_cast<const char*>(pixels), 8);
  }
  {
    std::ofstream lab(lab_path, std::ios::binary);
    const unsigned char header[8] = {0, 0, 8, 1, 0, 0, 0, 2};
    lab.write(reinterpret_cast<const char*>(header), 8);
    const unsigned char labels[2] = {3, 7};
    lab.write(reinterpret_cast<const char*>(labels), 2);
  }
  const auto ds = load_idx(img_path, lab_path);
  CHECK(ds.size() == 2);
  CHECK(ds.feature_dim == 4);
  CHECK(ds.labels == std::vector<int>{3, 7});
  CHECK(ds.features[0] == doctest::Approx(0.0));
  CHECK(ds.features[1] == doctest::Approx(51.0 / 255.0));
  CHECK(ds.features[5] == doctest::Approx(1.0));

  {
    std::ofstream img(img_path, std::ios::binary);
    const unsigned char bad[16] = {0, 0, 7, 3, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1};
    img.write(reinterpret_cast<const char*>(bad), 16);
  }
  CHECK_THROWS_AS(load_idx(img_path, lab_path), CodecError);
  std::remove(img_path);
  std::remove(lab_path);
}

TEST_CASE("training divergence is reported, not propagated silently") {
  MlpConfig mcfg{2, 4, 2};
  Mlp mlp(mcfg);
  const auto shard = tiny_separable();
  TrainConfig cfg;
  cfg.model = mcfg;
  Rng rng(61), init_rng(67);
  auto poisoned = mlp.init_params(init_rng);
  poisoned[3] = std::numeric_limits<double>::infinity();  // non-finite loss downstream
  CHECK_THROWS_AS(local_train(mlp, poisoned, shard, cfg, rng), TrainingDivergence);
}
