#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "badr/core.hpp"

namespace badr {

// mt19937_64 is specified bit-for-bit by the standard; the helpers below avoid
// the implementation-defined std::uniform_int_distribution and std::shuffle so
// seeded output is identical across standard libraries.
using Rng = std::mt19937_64;

inline Index uniform_index(Rng& rng, Index bound) {
  const std::uint64_t range = static_cast<std::uint64_t>(bound);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
  std::uint64_t draw = rng();
  while (draw >= limit) draw = rng();
  return static_cast<Index>(draw % range);
}

// Uniform in [0,1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Box-Muller; consumes two draws per call.
inline double standard_normal(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (Index i = items.size(); i > 1; --i) std::swap(items[i - 1], items[uniform_index(rng, i)]);
}

// k distinct elements of `pool`, uniformly without replacement, in draw order.
inline std::vector<Index> sample_without_replacement(const std::vector<Index>& pool, Index k, Rng& rng) {
  std::vector<Index> work = pool;
  for (Index i = 0; i < k; ++i) std::swap(work[i], work[i + uniform_index(rng, work.size() - i)]);
  work.resize(k);
  return work;
}

}  // namespace badr
