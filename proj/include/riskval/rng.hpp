#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace riskval {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed-splitting rule used everywhere a sub-stream is needed:
/// fold each key into the running state with mix64, in order.
/// derive_seed({run_seed, episode, step}) names one stream per step.
constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> keys) {
  std::uint64_t state = 0x5eed5eed5eed5eedULL;
  for (std::uint64_t k : keys) state = mix64(state ^ mix64(k));
  return state;
}

inline Rng make_rng(std::initializer_list<std::uint64_t> keys) { return Rng(derive_seed(keys)); }

/// Uniform draw in [0, 1) with 53 random bits; independent of the
/// standard library's distribution implementations.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace riskval
