#include "setnet/random.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "setnet/error.hpp"

namespace setnet {

std::string_view to_string(ErrorCategory category) noexcept {
    switch (category) {
        case ErrorCategory::dimension: return "dimension";
        case ErrorCategory::empty_reduction: return "empty-reduction";
        case ErrorCategory::numeric: return "numeric";
        case ErrorCategory::format: return "format";
        case ErrorCategory::config: return "config";
        case ErrorCategory::budget: return "budget";
        case ErrorCategory::contract: return "contract";
        case ErrorCategory::degenerate: return "degenerate";
    }
    return "unknown";
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double uniform01(Rng& rng) noexcept {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform(Rng& rng, double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform01(rng);
}

std::size_t uniform_index(Rng& rng, std::size_t n) noexcept {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r = rng();
    while (r >= limit) r = rng();
    return static_cast<std::size_t>(r % bound);
}

double standard_normal(Rng& rng) noexcept {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

bool bernoulli(Rng& rng, double p) noexcept { return uniform01(rng) < p; }

}  // namespace setnet
