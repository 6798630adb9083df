#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dpe {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
inline uint64_t MixBits(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a master seed and a tuple of
// indices (pixel, level, iteration, ...), so results do not depend on the
// order in which pixels are visited.
inline uint64_t DeriveSeed(uint64_t master, std::initializer_list<uint64_t> keys) {
  uint64_t h = MixBits(master);
  for (uint64_t k : keys) {
    h = MixBits(h ^ MixBits(k));
  }
  return h;
}

inline Rng MakeRng(uint64_t master, std::initializer_list<uint64_t> keys) {
  return Rng(DeriveSeed(master, keys));
}

// Uniform double in [0, 1) from the top 53 bits; unlike
// std::uniform_real_distribution this is identical across standard libraries.
inline double UniformUnit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double UniformRange(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * UniformUnit(rng);
}

// Uniform integer in [0, n).
inline int UniformIndex(Rng& rng, int n) {
  return static_cast<int>(UniformUnit(rng) * n);
}

}  // namespace dpe
