#pragma once

#include <cstdint>
#include <random>

namespace ttgoals {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Independent stream id for (seed, episode index, model id).
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t episode,
                                 std::uint64_t model = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ episode) ^ (model * 0x632BE59BD9B4E019ull));
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace ttgoals
