#pragma once

#include <cstdint>
#include <random>

namespace rlbd {

using Rng = std::mt19937_64;

// Derives an independent seed for a named sub-stream (splitmix64 finalizer).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Uniform double in [0, 1) built from the top 53 bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double standard_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

// Uniform integer in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(rng);
}

// Stream identifiers used with derive_seed so unrelated consumers never share draws.
namespace streams {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kActions = 2;
inline constexpr std::uint64_t kEnvs = 3;
inline constexpr std::uint64_t kPoison = 4;
inline constexpr std::uint64_t kSchedule = 5;
inline constexpr std::uint64_t kSurgery = 6;
inline constexpr std::uint64_t kSamples = 7;
}  // namespace streams

}  // namespace rlbd
