#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace wstan {

using Rng = std::mt19937_64;

/// Independent sub-seed for stream `stream` of a base seed (splitmix64 mix).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::vector<double> uniform_values(Rng& rng, std::size_t count,
                                          double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(count);
  for (auto& x : v) x = dist(rng);
  return v;
}

inline std::vector<double> normal_values(Rng& rng, std::size_t count,
                                         double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(count);
  for (auto& x : v) x = dist(rng);
  return v;
}

}  // namespace wstan
