#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace rcsieve {

using Rng = std::mt19937_64;

/// Independent stream for (seed, index, purpose). The same triple always
/// yields the same sequence, whatever thread consumes it.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t index, std::uint64_t purpose = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(purpose)};
  return Rng(seq);
}

/// Uniform on (0, 1) from the top 53 bits; never returns 0 or 1.
inline double uniform_open(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal via Box-Muller on uniform_open, so draws depend only on
/// the engine and not on the standard library's distribution code.
inline double standard_normal(Rng& rng) {
  const double u1 = uniform_open(rng);
  const double u2 = uniform_open(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925 * u2);
}

}  // namespace rcsieve
