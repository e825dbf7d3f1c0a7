#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace oselmq {

/// Mixes a 64-bit value into a well-distributed one.  Used to derive
/// independent substreams (e.g. the environment stream) from one trial seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic random source.  A thin wrapper over std::mt19937_64 with
/// fixed derivation rules so that a seed reproduces the same stream on any
/// platform: uniform doubles take the top 53 bits of one draw, and bounded
/// integers use rejection sampling (no modulo bias, draws are consumed only
/// as needed).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).  n must be nonzero.
  std::size_t uniform_index(std::size_t n) {
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % static_cast<std::uint64_t>(n);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return static_cast<std::size_t>(x % static_cast<std::uint64_t>(n));
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace oselmq
