#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace stagedur {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/**
 * Seed of stream `index` derived from `master`. Every trajectory or worker
 * gets its own stream, so results do not depend on scheduling.
 */
inline std::uint64_t split_seed(std::uint64_t master, std::uint64_t index) {
    return mix64(mix64(master) ^ mix64(index + 0xA0761D6478BD642Full));
}

inline Rng make_stream(std::uint64_t master, std::uint64_t index) {
    return Rng(split_seed(master, index));
}

/// Uniform on [0, 1) with 53 random bits; identical across standard libraries.
inline double uniform01(Rng& rng) { return double(rng() >> 11) * 0x1.0p-53; }

/// Uniform on (0, 1].
inline double uniform_open_closed(Rng& rng) { return 1.0 - uniform01(rng); }

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

/// Index drawn from nonnegative weights summing to (about) one.
inline std::size_t sample_index(Rng& rng, std::span<const double> weights) {
    double u = uniform01(rng);
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        last_positive = i;
        if (u < weights[i]) return i;
        u -= weights[i];
    }
    return last_positive;
}

} // namespace stagedur
