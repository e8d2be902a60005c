#pragma once

#include <cmath>
#include <cstdint>

namespace spikegen {

/// Counter-based splittable RNG. Each draw mixes (key, counter) through the
/// splitmix64 finalizer, so streams are reproducible and independent of call
/// interleaving across split children.
class Rng {
 public:
  explicit Rng(uint64_t seed, uint64_t stream = 0)
      : key_(mix(seed ^ 0x9e3779b97f4a7c15ull, stream)) {}

  /// Child generator for an independent named stream.
  Rng split(uint64_t stream) const { return Rng(key_, stream ^ 0xc2b2ae3d27d4eb4full); }

  uint64_t next_u64() { return mix(key_, counter_++); }

  /// Uniform in [0,1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  float uniform(float lo, float hi) {
    return lo + static_cast<float>(uniform()) * (hi - lo);
  }

  /// Uniform integer in [0, n).
  int uniform_int(int n) {
    return static_cast<int>(next_u64() % static_cast<uint64_t>(n));
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller (two draws per call, no caching).
  float normal() {
    double u1 = uniform(), u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return static_cast<float>(std::sqrt(-2.0 * std::log(u1)) *
                              std::cos(6.283185307179586 * u2));
  }

 private:
  static uint64_t mix(uint64_t key, uint64_t x) {
    uint64_t z = x + key + 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  uint64_t key_;
  uint64_t counter_ = 0;
};

}  // namespace spikegen
