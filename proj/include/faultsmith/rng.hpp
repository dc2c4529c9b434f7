#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace faultsmith {

// std::shuffle and the std distributions are implementation-defined, which
// would break run manifests across standard libraries. Everything stochastic
// in the pipeline draws through these helpers instead; mt19937_64 itself is
// fully specified.

inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 14695981039346656037ULL) {
    std::uint64_t h = seed;
    for (const char c : data) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

/// Derives a stream-local seed so per-record randomness does not depend on
/// processing order.
inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view salt, std::uint64_t index = 0) {
    std::uint64_t h = fnv1a64(salt, seed ^ 0x9E3779B97F4A7C15ULL);
    h ^= index + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
    return h;
}

/// Uniform-ish index in [0, n). The modulo bias is irrelevant at pipeline
/// scale; bit-for-bit reproducibility is the contract here.
inline std::size_t bounded(std::mt19937_64& rng, std::size_t n) {
    return static_cast<std::size_t>(rng() % n);
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double unit_draw(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename T>
void fisher_yates(std::vector<T>& items, std::mt19937_64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = bounded(rng, i);
        std::swap(items[i - 1], items[j]);
    }
}

} // namespace faultsmith
