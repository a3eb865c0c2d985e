#pragma once

// Deterministic randomness plumbing. Every consumer owns an mt19937_64
// seeded through splitmix64 mixing, and per-function substreams are derived
// from (seed, function key) so results never depend on iteration order.

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace faasched {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
    return splitmix64(splitmix64(splitmix64(a) ^ b) ^ c);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(splitmix64(seed)); }

// Uniform on the open interval (0, 1); never returns an endpoint, so logs
// and divisions stay finite.
inline double uniform_open01(std::mt19937_64& g) {
    return (static_cast<double>(g() >> 11) + 0.5) * 0x1.0p-53;
}

inline double exponential_sample(std::mt19937_64& g, double mean) {
    return -mean * std::log(uniform_open01(g));
}

// Unbiased integer in [0, n), rejection method.
inline std::uint64_t uniform_below(std::mt19937_64& g, std::uint64_t n) {
    const std::uint64_t threshold = (0ULL - n) % n;
    for (;;) {
        std::uint64_t v = g();
        if (v >= threshold) return v % n;
    }
}

// Half-up rounding of a non-negative value to integer microseconds.
inline std::int64_t round_half_up(double x) {
    return static_cast<std::int64_t>(std::floor(x + 0.5));
}

} // namespace faasched
