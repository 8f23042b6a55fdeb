#pragma once

#include <cmath>
#include <cstdint>

namespace safeset {

// Counter-based splitmix64 generator. Used everywhere instead of <random>
// engines so that seed -> value streams are bit-identical across platforms
// and standard libraries.
struct Rng {
  std::uint64_t state = 0;

  Rng() = default;
  explicit Rng(std::uint64_t seed) : state(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0,1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n), n > 0, without modulo bias.
  std::uint64_t next_below(std::uint64_t n) {
    std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Standard normal via Box-Muller (two uniform draws per call, no caching,
  // so the draw count per call is fixed).
  double next_normal() {
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }
};

// Deterministic child-seed derivation: mixes (master, index) so per-run
// streams do not depend on how much randomness the parent consumed.
inline std::uint64_t child_seed(std::uint64_t master, std::uint64_t index) {
  Rng r(master ^ (0x632BE59BD9B4E019ull * (index + 1)));
  return r.next_u64();
}

}  // namespace safeset
