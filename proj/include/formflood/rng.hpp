#pragma once

#include <cstdint>
#include <random>

namespace formflood {

// splitmix64: cheap, well-mixed 64-bit finalizer. Used to derive independent
// stream seeds from a (base_seed, key...) tuple so replications don't overlap.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix64(splitmix64(base ^ splitmix64(a)) ^ splitmix64(b + 0x632be59bd9b4e019ULL));
}

using Rng = std::mt19937_64;

// Uniform in [0,1). Avoids std::uniform_real_distribution so the exact byte
// stream of results is stable across standard library implementations.
inline double uniform01(Rng& rng) {
    return (rng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

// Integer in [0, n). Rejection-free modulo bias is acceptable only for tiny n;
// use Lemire-style rejection to keep picks exact.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    if (n <= 1) return 0;
    std::uint64_t threshold = (0 - n) % n;
    for (;;) {
        std::uint64_t r = rng();
        if (r >= threshold) return r % n;
    }
}

} // namespace formflood
