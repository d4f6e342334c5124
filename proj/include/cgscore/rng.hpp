#pragma once

// Deterministic randomness. Every stochastic operation in the library draws
// from Xoshiro256PlusPlus seeded through SplitMix64, with explicit transforms
// for uniforms and normals, so a given seed produces byte-identical results on
// any platform and standard library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "cgscore/errors.hpp"

namespace cgscore {

// splitmix64 step; advances `state` and returns the next output.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// xoshiro256++ by Blackman and Vigna; 64-bit state words seeded via splitmix64.
class Xoshiro256PlusPlus {
 public:
  explicit Xoshiro256PlusPlus(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Unbiased uniform integer in [0, bound); rejection sampling from the top.
  std::uint64_t uniform_below(std::uint64_t bound) {
    if (bound == 0) throw InternalError("uniform_below: bound must be positive");
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

  // Standard normal via Box-Muller; the second draw of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t state_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stream seed for (class, run) pairs: base XOR a splitmix64 hash of the pair.
// Keeps runs and classes decorrelated while staying reproducible.
inline std::uint64_t derive_stream_seed(std::uint64_t base, std::uint64_t class_id,
                                        std::uint64_t run_index) {
  std::uint64_t s = class_id * 0x9E3779B97F4A7C15ULL + 0xD6E8FEB86659FD93ULL;
  const std::uint64_t h1 = splitmix64(s);
  s = h1 ^ (run_index * 0xBF58476D1CE4E5B9ULL + 0x2545F4914F6CDD1DULL);
  return base ^ splitmix64(s);
}

// k distinct values sampled uniformly from {0, ..., n-1} by partial
// Fisher-Yates; returned in ascending order.
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                           Xoshiro256PlusPlus& rng) {
  if (k > n) throw InternalError("sample_without_replacement: k > n");
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_below(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace cgscore
