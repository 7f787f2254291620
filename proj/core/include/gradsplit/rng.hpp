#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace gradsplit {

using Rng = std::mt19937_64;

// splitmix64 finalizer over (base, stream); derives independent substreams
// from one trial seed so shuffles, noise draws and probe directions never
// share state.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Uniform in [0, 1) with 53-bit resolution. The distribution code is ours
// rather than <random>'s so that streams are identical across standard
// library implementations.
inline double uniform_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform_unit(rng);
}

// Box-Muller, one normal per call (two uniforms consumed).
inline double normal(Rng& rng, double mean = 0.0, double stddev = 1.0) {
    const double u1 = 1.0 - uniform_unit(rng);  // (0, 1]
    const double u2 = uniform_unit(rng);
    const double z = std::sqrt(-2.0 * std::log(u1)) *
                     std::cos(2.0 * std::numbers::pi * u2);
    return mean + stddev * z;
}

}  // namespace gradsplit
