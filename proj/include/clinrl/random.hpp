#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>

namespace clinrl {

/// Uniform double in [0, 1) from the top 53 bits of one draw. Unlike the
/// standard distributions this is identical across library implementations.
template <class Rng>
double unit_draw(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Index in [0, n) from one draw.
template <class Rng>
std::size_t index_draw(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(unit_draw(rng) * static_cast<double>(n));
}

/// Standard normal deviate by Box-Muller from two draws.
template <class Rng>
double normal_draw(Rng& rng) {
  const double u1 = 1.0 - unit_draw(rng);
  const double u2 = unit_draw(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace clinrl
