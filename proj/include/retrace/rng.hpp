// Copyright (c) 2026 The retrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "retrace/math.hpp"

namespace retrace {

inline uint64_t mix64(uint64_t x) {
  // splitmix64 finalizer
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Counter-based random stream. A sample's value depends only on
// (seed, stream ids, dimension), never on call order, so forward and
// replay passes see identical numbers and results do not depend on
// thread scheduling.
class PathRng {
 public:
  PathRng() = default;
  PathRng(uint64_t seed, uint64_t view, uint64_t pixel, uint64_t sample) {
    base_ = mix64(seed);
    base_ = mix64(base_ ^ (view * 0xA24BAED4963EE407ull));
    base_ = mix64(base_ ^ (pixel * 0x9FB21C651E98DF25ull));
    base_ = mix64(base_ ^ (sample * 0xD6E8FEB86659FD93ull));
  }

  // Uniform in [0, 1).
  double next() {
    uint64_t v = mix64(base_ ^ (uint64_t(dim_++) * 0x2545F4914F6CDD1Dull));
    return double(v >> 11) * 0x1p-53;
  }

  Vec2 next2() {
    double a = next();
    double b = next();
    return {a, b};
  }

  uint32_t dimension() const { return dim_; }

 private:
  uint64_t base_ = 0;
  uint32_t dim_ = 0;
};

// Convenience generator for tests and fixtures; same stream quality,
// sequential interface.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : state_(mix64(seed ^ 0x853C49E6748FEA9Bull)) {}

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return mix64(state_);
  }
  double uniform() { return double(next_u64() >> 11) * 0x1p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int n) { return int(next_u64() % uint64_t(n)); }

 private:
  uint64_t state_;
};

}  // namespace retrace
