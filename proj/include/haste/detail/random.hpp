#pragma once

// Seeded sampling helpers with a fixed algorithm, so subsets drawn from a
// seed are identical across standard library implementations.

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace haste::detail {

using Rng = std::mt19937_64;

/// Uniform integer in [0, bound) by rejection on the raw 64-bit stream.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
  const std::uint64_t limit = Rng::max() - Rng::max() % bound;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % bound;
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// First k elements of a Fisher-Yates shuffle of `pool`, in draw order.
template <typename T>
std::vector<T> sample_without_replacement(std::vector<T> pool, std::size_t k, Rng& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_below(rng, pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace haste::detail
