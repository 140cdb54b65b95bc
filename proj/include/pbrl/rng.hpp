#pragma once

#include <cstdint>

#include "pbrl/types.hpp"

namespace pbrl {

/// Counter-based deterministic generator (SplitMix64).
///
/// Output i is mix64(seed + (i+1) * 0x9E3779B97F4A7C15), so the stream is a
/// pure function of (seed, counter) and reproduces bit-exactly on any
/// platform with 64-bit integers and IEEE doubles. Sub-streams are derived
/// with derive(), never by reusing a seed.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Index sampled from a probability vector by CDF inversion.
  int next_categorical(const Vec& p) {
    double u = next_double();
    double acc = 0.0;
    for (int i = 0; i < p.size(); ++i) {
      acc += p[i];
      if (u < acc) return i;
    }
    return int(p.size()) - 1;
  }

  /// Independent child stream for (master, index) pairs.
  static uint64_t derive(uint64_t master, uint64_t index) {
    SplitMix64 g(master ^ (0xD1B54A32D192ED03ULL + index * 0x9E3779B97F4A7C15ULL));
    return g.next_u64();
  }

 private:
  uint64_t state_;
};

}  // namespace pbrl
