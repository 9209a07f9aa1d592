#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace smm {

// Counter-based generator: value i of a stream is a stateless hash of
// (key, i), so coupled simulations can consume identical randomness from
// identically named streams regardless of how other streams interleave.
struct CounterRng {
  uint64_t key = 0;
  uint64_t counter = 0;

  static uint64_t mix(uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static uint64_t hash_name(std::string_view name) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : name) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    return h;
  }

  // Named substream idx of a seed: e.g. ("service", server index).
  static CounterRng stream(uint64_t seed, std::string_view name,
                           uint64_t idx = 0) {
    uint64_t k = mix(seed ^ hash_name(name));
    k = mix(k + 0xD1B54A32D192ED03ULL * (idx + 1));
    return CounterRng{k, 0};
  }

  uint64_t value_at(uint64_t c) const {
    return mix(key + 0x9E3779B97F4A7C15ULL * (c + 1));
  }

  uint64_t next_u64() { return value_at(counter++); }

  // Uniform in [0, 1) with 53 significant bits.
  double next_uniform() {
    return double(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform_at(uint64_t c) const {
    return double(value_at(c) >> 11) * 0x1.0p-53;
  }

  // Exponential with the given rate; uses -log(1-u) so u = 0 is safe.
  double next_exponential(double rate) {
    return -std::log1p(-next_uniform()) / rate;
  }

  // Index in [0, n).
  uint64_t next_below(uint64_t n) {
    return uint64_t(next_uniform() * double(n)) % n;
  }
};

}  // namespace smm
