#pragma once

#include <cmath>
#include <cstdint>

namespace dds {

// Counter-based RNG: every draw is a pure hash of (seed, a, b, c). Draws are
// independent of iteration order, which is what makes integer-mode runs
// byte-reproducible and lets two engines consume identical random values.
namespace rng {

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t key(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                         std::uint64_t c = 0) {
    std::uint64_t h = mix64(seed);
    h = mix64(h ^ a);
    h = mix64(h ^ b);
    h = mix64(h ^ c);
    return h;
}

/// Uniform double in [0, 1) from a hashed key.
inline double uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                      std::uint64_t c = 0) {
    return static_cast<double>(key(seed, a, b, c) >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller on two keyed uniforms.
inline double normal(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                     std::uint64_t c = 0) {
    double u1 = uniform(seed, a, b, c * 2 + 1);
    double u2 = uniform(seed, a, b, c * 2 + 2);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

/// Round x to floor(x) or floor(x)+1 with probability equal to the fraction,
/// using the supplied uniform draw. Expectation is exactly x.
inline long long stochastic_round(double x, double u) {
    double fl = std::floor(x);
    double frac = x - fl;
    return static_cast<long long>(fl) + (u < frac ? 1 : 0);
}

} // namespace rng
} // namespace dds
