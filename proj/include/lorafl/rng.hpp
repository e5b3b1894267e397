#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace lorafl {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Child seed from a master seed and a stream path, so that every consumer of
// randomness owns an independent, reproducible stream.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t state = master;
  std::uint64_t h = splitmix64(state);
  for (std::uint64_t token : path) {
    state = h ^ (token * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL);
    h = splitmix64(state);
  }
  return h;
}

// Deterministic random stream. The engine is std::mt19937_64 (fully specified
// by the standard); all distributions are inverted by hand because the
// standard library's distribution objects differ across implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; used where an inclusive upper bound matters.
  double uniform_pos() {
    return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), unbiased via rejection.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
    const std::uint64_t reject_below = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t x = gen_();
      if (x >= reject_below) return x % n;
    }
  }

  double exponential(double mean) {
    if (!(mean > 0)) throw std::invalid_argument("exponential: mean must be positive");
    return -mean * std::log1p(-uniform());
  }

  double normal(double mean, double stddev) {
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log1p(-u1));
    return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Counts unit-rate arrivals in [0, mean]; O(mean) but exact, and the means
  // used here are modest.
  std::uint64_t poisson(double mean) {
    if (!(mean >= 0)) throw std::invalid_argument("poisson: mean must be nonnegative");
    if (mean == 0) return 0;
    std::uint64_t count = 0;
    double acc = exponential(1.0);
    while (acc <= mean) {
      ++count;
      acc += exponential(1.0);
    }
    return count;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // m distinct values from {0, ..., n-1}, in draw order.
  std::vector<int> sample_without_replacement(int n, int m) {
    if (m < 0 || m > n)
      throw std::invalid_argument("sample_without_replacement: need 0 <= m <= n");
    std::vector<int> pool(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < m; ++i) {
      const auto j = static_cast<std::size_t>(i) +
                     static_cast<std::size_t>(uniform_int(static_cast<std::uint64_t>(n - i)));
      std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
    }
    pool.resize(static_cast<std::size_t>(m));
    return pool;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace lorafl
