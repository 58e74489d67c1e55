#pragma once

#include <cstdint>
#include <random>

namespace kmesn {

using Rng = std::mt19937_64;

/// Mixes a user seed with a stream id so independent consumers (input
/// weights, recurrent weights, bias, clustering, folds) draw from
/// decorrelated generators. Pure function of its arguments.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  return Rng(derive_seed(seed, stream));
}

/// Uniform double in [low, high) built from the top 53 bits of one draw.
double uniform(Rng& rng, double low, double high) noexcept;

/// Uniform index in [0, n). n must be > 0.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

}  // namespace kmesn
