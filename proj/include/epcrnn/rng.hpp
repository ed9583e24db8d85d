#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ep {

// FNV-1a, used for substream derivation and file/spec digests.
inline uint64_t fnv1a(const void* bytes, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a(std::string_view s, uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a(s.data(), s.size(), h);
}

// Named substream: independent deterministic generators per component so that
// e.g. allocating LE projection matrices does not shift the draws used for
// layer weights (required for the kappa=0 bit-identity reduction).
inline std::mt19937_64 substream(uint64_t seed, std::string_view tag) {
    uint64_t h = fnv1a(tag);
    h ^= seed + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return std::mt19937_64(h);
}

// Uniform draws defined directly on the mt19937_64 output so the sequence is
// identical across standard libraries and across f32/f64 builds.
inline double uniform01(std::mt19937_64& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform_range(std::mt19937_64& g, double lo, double hi) {
    return lo + (hi - lo) * uniform01(g);
}

inline int uniform_int(std::mt19937_64& g, int n) {  // [0, n)
    return static_cast<int>(g() % static_cast<uint64_t>(n));
}

}  // namespace ep
