#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>

// Data-parallel inner loops behind the training and evaluation paths.
//
// kernels::serial is the reference implementation; kernels::par is the
// OpenMP version. Every parallel kernel writes each output element with the
// same serial inner loop as the reference, so the two produce bit-identical
// results for any thread count. Tests assert this, and the bench target
// compares their throughput.

namespace lorafl::kernels {

using index_t = std::int64_t;

namespace serial {

// y[s,o] = b[o] + sum_c x[s,c] * w[o,c]   (x: batch x in, w: out x in, row-major)
inline void linear_forward(std::span<const double> x, index_t batch, index_t in_dim,
                           std::span<const double> w, std::span<const double> b,
                           index_t out_dim, std::span<double> y) {
  for (index_t s = 0; s < batch; ++s)
    for (index_t o = 0; o < out_dim; ++o) {
      const double* xs = &x[static_cast<std::size_t>(s * in_dim)];
      const double* wo = &w[static_cast<std::size_t>(o * in_dim)];
      double acc = b[static_cast<std::size_t>(o)];
      for (index_t c = 0; c < in_dim; ++c) acc += xs[c] * wo[c];
      y[static_cast<std::size_t>(s * out_dim + o)] = acc;
    }
}

inline void relu(std::span<double> a) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = a[i] > 0.0 ? a[i] : 0.0;
}

// grad[i] := grad[i] if act[i] > 0 else 0
inline void relu_backward(std::span<const double> act, std::span<double> grad) {
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!(act[i] > 0.0)) grad[i] = 0.0;
}

// Per-sample softmax cross-entropy. dlogits[s,:] = softmax(logits[s,:]) - onehot,
// losses[s] = -log softmax(logits[s, label]).
inline void softmax_xent(std::span<const double> logits, std::span<const int> labels,
                         index_t batch, index_t classes, std::span<double> dlogits,
                         std::span<double> losses) {
  for (index_t s = 0; s < batch; ++s) {
    const double* row = &logits[static_cast<std::size_t>(s * classes)];
    double m = row[0];
    for (index_t c = 1; c < classes; ++c) m = std::max(m, row[c]);
    double z = 0.0;
    for (index_t c = 0; c < classes; ++c) z += std::exp(row[c] - m);
    const double logz = std::log(z);
    double* drow = &dlogits[static_cast<std::size_t>(s * classes)];
    const int label = labels[static_cast<std::size_t>(s)];
    for (index_t c = 0; c < classes; ++c) {
      const double p = std::exp(row[c] - m) / z;
      drow[c] = p - (c == label ? 1.0 : 0.0);
    }
    losses[static_cast<std::size_t>(s)] = -(row[label] - m - logz);
  }
}

// dw[o,c] = sum_s dy[s,o] * x[s,c]
inline void linear_backward_weights(std::span<const double> dy, std::span<const double> x,
                                    index_t batch, index_t out_dim, index_t in_dim,
                                    std::span<double> dw) {
  for (index_t o = 0; o < out_dim; ++o)
    for (index_t c = 0; c < in_dim; ++c) {
      double acc = 0.0;
      for (index_t s = 0; s < batch; ++s)
        acc += dy[static_cast<std::size_t>(s * out_dim + o)] *
               x[static_cast<std::size_t>(s * in_dim + c)];
      dw[static_cast<std::size_t>(o * in_dim + c)] = acc;
    }
}

// db[o] = sum_s dy[s,o]
inline void linear_backward_bias(std::span<const double> dy, index_t batch,
                                 index_t out_dim, std::span<double> db) {
  for (index_t o = 0; o < out_dim; ++o) {
    double acc = 0.0;
    for (index_t s = 0; s < batch; ++s)
      acc += dy[static_cast<std::size_t>(s * out_dim + o)];
    db[static_cast<std::size_t>(o)] = acc;
  }
}

// dx[s,c] = sum_o dy[s,o] * w[o,c]
inline void linear_backward_input(std::span<const double> dy, std::span<const double> w,
                                  index_t batch, index_t out_dim, index_t in_dim,
                                  std::span<double> dx) {
  for (index_t s = 0; s < batch; ++s)
    for (index_t c = 0; c < in_dim; ++c) {
      double acc = 0.0;
      for (index_t o = 0; o < out_dim; ++o)
        acc += dy[static_cast<std::size_t>(s * out_dim + o)] *
               w[static_cast<std::size_t>(o * in_dim + c)];
      dx[static_cast<std::size_t>(s * in_dim + c)] = acc;
    }
}

// y += a * x
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

inline void scale(double a, std::span<double> x) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] *= a;
}

// Fixed left-to-right order; the deterministic reduction used everywhere.
inline double sum(std::span<const double> x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i];
  return acc;
}

}  // namespace serial

namespace par {

inline void linear_forward(std::span<const double> x, index_t batch, index_t in_dim,
                           std::span<const double> w, std::span<const double> b,
                           index_t out_dim, std::span<double> y) {
#pragma omp parallel for collapse(2) schedule(static)
  for (index_t s = 0; s < batch; ++s)
    for (index_t o = 0; o < out_dim; ++o) {
      const double* xs = &x[static_cast<std::size_t>(s * in_dim)];
      const double* wo = &w[static_cast<std::size_t>(o * in_dim)];
      double acc = b[static_cast<std::size_t>(o)];
      for (index_t c = 0; c < in_dim; ++c) acc += xs[c] * wo[c];
      y[static_cast<std::size_t>(s * out_dim + o)] = acc;
    }
}

inline void relu(std::span<double> a) {
  const index_t n = static_cast<index_t>(a.size());
#pragma omp parallel for schedule(static)
  for (index_t i = 0; i < n; ++i)
    a[static_cast<std::size_t>(i)] =
        a[static_cast<std::size_t>(i)] > 0.0 ? a[static_cast<std::size_t>(i)] : 0.0;
}

inline void relu_backward(std::span<const double> act, std::span<double> grad) {
  const index_t n = static_cast<index_t>(grad.size());
#pragma omp parallel for schedule(static)
  for (index_t i = 0; i < n; ++i)
    if (!(act[static_cast<std::size_t>(i)] > 0.0)) grad[static_cast<std::size_t>(i)] = 0.0;
}

inline void softmax_xent(std::span<const double> logits, std::span<const int> labels,
                         index_t batch, index_t classes, std::span<double> dlogits,
                         std::span<double> losses) {
#pragma omp parallel for schedule(static)
  for (index_t s = 0; s < batch; ++s) {
    const double* row = &logits[static_cast<std::size_t>(s * classes)];
    double m = row[0];
    for (index_t c = 1; c < classes; ++c) m = std::max(m, row[c]);
    double z = 0.0;
    for (index_t c = 0; c < classes; ++c) z += std::exp(row[c] - m);
    const double logz = std::log(z);
    double* drow = &dlogits[static_cast<std::size_t>(s * classes)];
    const int label = labels[static_cast<std::size_t>(s)];
    for (index_t c = 0; c < classes; ++c) {
      const double p = std::exp(row[c] - m) / z;
      drow[c] = p - (c == label ? 1.0 : 0.0);
    }
    losses[static_cast<std::size_t>(s)] = -(row[label] - m - logz);
  }
}

inline void linear_backward_weights(std::span<const double> dy, std::span<const double> x,
                                    index_t batch, index_t out_dim, index_t in_dim,
                                    std::span<double> dw) {
#pragma omp parallel for collapse(2) schedule(static)
  for (index_t o = 0; o < out_dim; ++o)
    for (index_t c = 0; c < in_dim; ++c) {
      double acc = 0.0;
      for (index_t s = 0; s < batch; ++s)
        acc += dy[static_cast<std::size_t>(s * out_dim + o)] *
               x[static_cast<std::size_t>(s * in_dim + c)];
      dw[static_cast<std::size_t>(o * in_dim + c)] = acc;
    }
}

inline void linear_backward_bias(std::span<const double> dy, index_t batch,
                                 index_t out_dim, std::span<double> db) {
#pragma omp parallel for schedule(static)
  for (index_t o = 0; o < out_dim; ++o) {
    double acc = 0.0;
    for (index_t s = 0; s < batch; ++s)
      acc += dy[static_cast<std::size_t>(s * out_dim + o)];
    db[static_cast<std::size_t>(o)] = acc;
  }
}

inline void linear_backward_input(std::span<const double> dy, std::span<const double> w,
                                  index_t batch, index_t out_dim, index_t in_dim,
                                  std::span<double> dx) {
#pragma omp parallel for collapse(2) schedule(static)
  for (index_t s = 0; s < batch; ++s)
    for (index_t c = 0; c < in_dim; ++c) {
      double acc = 0.0;
      for (index_t o = 0; o < out_dim; ++o)
        acc += dy[static_cast<std::size_t>(s * out_dim + o)] *
               w[static_cast<std::size_t>(o * in_dim + c)];
      dx[static_cast<std::size_t>(s * in_dim + c)] = acc;
    }
}

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  const index_t n = static_cast<index_t>(y.size());
#pragma omp parallel for schedule(static)
  for (index_t i = 0; i < n; ++i)
    y[static_cast<std::size_t>(i)] += a * x[static_cast<std::size_t>(i)];
}

inline void scale(double a, std::span<double> x) {
  const index_t n = static_cast<index_t>(x.size());
#pragma omp parallel for schedule(static)
  for (index_t i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] *= a;
}

}  // namespace par

}  // namespace lorafl::kernels
