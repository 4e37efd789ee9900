// Copyright 2026 csvmasr authors
// Deterministic random number generation. Hand-rolled (splitmix64 seeding,
// xoshiro256** core) so that streams are reproducible byte-for-byte across
// standard libraries and platforms for a fixed seed.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

#include "csvmasr/common.hpp"

namespace csvmasr {

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
  }

  // Derives an independent stream id from a seed and a path of indices.
  // Used to give every utterance / epoch its own order-independent stream.
  static uint64_t derive(uint64_t seed, std::initializer_list<uint64_t> path) {
    uint64_t state = seed ^ 0xa076'1d64'78bd'642fULL;
    uint64_t h = splitmix64(state);
    for (uint64_t p : path) {
      state = h ^ (p + 0x9e3779b97f4a7c15ULL);
      h = splitmix64(state);
    }
    return h;
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (fresh pair per draw, no caching).
  double gaussian() {
    double u1 = uniform();
    // Map [0,1) to (0,1] so the log is finite.
    u1 = 1.0 - u1;
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double gaussian(double mean, double stddev) {
    return mean + stddev * gaussian();
  }

  // Uniform integer in [lo, hi], inclusive. Unbiased via rejection.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    CM_CHECK(lo <= hi, "uniform_int: empty range [", lo, ", ", hi, "]");
    uint64_t range = static_cast<uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<int64_t>(next_u64());  // full range
    uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    uint64_t draw;
    do {
      draw = next_u64();
    } while (draw >= limit);
    return lo + static_cast<int64_t>(draw % range);
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  static uint64_t rotl(uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  uint64_t s_[4];
};

}  // namespace csvmasr
