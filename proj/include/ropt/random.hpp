#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ropt {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Seed for an independent generator stream, so work items indexed by `index`
// can run concurrently without sharing an engine.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index + 0x632be59bd9b4e019ull));
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
  return std::mt19937_64(splitmix64(seed));
}

inline double uniform_real(std::mt19937_64& g, double lo, double hi) {
  double t = static_cast<double>(g() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * t;
}

inline double normal(std::mt19937_64& g) {
  double u1 = uniform_real(g, 0.0, 1.0);
  double u2 = uniform_real(g, 0.0, 1.0);
  return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(6.283185307179586477 * u2);
}

}  // namespace ropt
