#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace setnet {

// All randomness in the library flows through this engine. The helpers below
// consume raw engine output directly so results do not depend on the
// standard library's distribution implementations.
using Rng = std::mt19937_64;

/// Mixes a base seed with a stream id (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// Uniform on [0, 1) with 53 random bits.
double uniform01(Rng& rng) noexcept;

double uniform(Rng& rng, double lo, double hi) noexcept;

/// Unbiased integer in [0, n). Requires n > 0.
std::size_t uniform_index(Rng& rng, std::size_t n) noexcept;

/// Standard normal via Box-Muller; draws two uniforms per call and keeps no cache.
double standard_normal(Rng& rng) noexcept;

bool bernoulli(Rng& rng, double p) noexcept;

}  // namespace setnet
