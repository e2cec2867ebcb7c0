#pragma once

#include "dlgnet/namespace.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

DLGNET_NAMESPACE_BEGIN

/// SplitMix64 stream. Every draw is defined by integer arithmetic only, so a
/// seed reproduces the same stream on every platform and standard library.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed = 0) : seed_(seed), state_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  bool coin() { return (next_u64() >> 63) != 0; }
  /// Standard normal via Box-Muller (no cached second value).
  double normal();

  /// Fisher-Yates permutation of [0, n).
  std::vector<std::size_t> permutation(std::size_t n);

  /// Independent child stream derived from this seed and a key.
  SeededRng fork(std::uint64_t key) const;

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

/// Stateless SplitMix64 finalizer; used to derive per-step seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

DLGNET_NAMESPACE_END
