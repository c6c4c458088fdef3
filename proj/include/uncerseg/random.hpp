#pragma once

// Seeded randomness that reproduces bit-for-bit across platforms.
//
// std::mt19937_64's output sequence is fixed by the standard; the
// std::*_distribution adaptors are not, so the transforms to uniform and
// normal variates are done here.

#include <cstdint>
#include <random>
#include <string_view>

namespace uncerseg {

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Deterministic child seed for a named or numbered sub-stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

/// FNV-1a 64 over bytes; stable across runs and platforms.
std::uint64_t stable_hash(std::string_view text);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}
  /// Independent stream for (seed, draw_index).
  Rng(std::uint64_t seed, std::uint64_t draw_index) : Rng(derive_seed(seed, draw_index)) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n) without modulo bias.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller (the cosine branch only).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace uncerseg
