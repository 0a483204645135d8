// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

#include "cdiff/types.hpp"

namespace cdiff {

/// Engine plus the distributions every sampler here needs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_(engine_); }

  Vec normal_vector(Eigen::Index n) {
    Vec z(n);
    fill_normal(z);
    return z;
  }

  template <typename Derived>
  void fill_normal(Eigen::MatrixBase<Derived>& z) {
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal_(engine_);
  }

  /// Uniform direction on the unit sphere.
  Vec direction(Eigen::Index n) {
    Vec z = normal_vector(n);
    double norm = z.norm();
    while (!(norm > 0.0)) {
      z = normal_vector(n);
      norm = z.norm();
    }
    return z / norm;
  }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Derives independent streams from (seed, key...) so results do not depend
/// on the order or the worker that consumes them.
class RandomStreams {
 public:
  explicit RandomStreams(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  Rng stream(std::uint64_t key) const { return Rng(splitmix64(seed_ ^ splitmix64(key))); }
  Rng stream(std::uint64_t key1, std::uint64_t key2) const {
    return Rng(splitmix64(splitmix64(seed_ ^ splitmix64(key1)) + key2));
  }

  /// A child family, e.g. one per training iteration.
  RandomStreams child(std::uint64_t key) const { return RandomStreams(splitmix64(seed_ + 0x632be59bd9b4e019ull * (key + 1))); }

 private:
  std::uint64_t seed_;
};

}  // namespace cdiff
