#pragma once

#include <cmath>
#include <cstdint>

namespace lensless {

/// Counter-style RNG used wherever reproducibility across thread counts
/// matters: every draw is keyed by (seed, index), so work can be partitioned
/// arbitrarily without changing the stream.
struct SplitMix64 {
    uint64_t state;
    explicit SplitMix64(uint64_t s) : state(s) {}
    uint64_t next() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
};

inline uint64_t mix_key(uint64_t a, uint64_t b) {
    SplitMix64 s(a ^ (b * 0x9e3779b97f4a7c15ULL));
    return s.next();
}

inline double uniform01(uint64_t bits) {
    return double(bits >> 11) * 0x1.0p-53;  // [0, 1)
}

/// Two independent standard normals via Box-Muller.
inline void gaussian_pair(SplitMix64& s, double& g0, double& g1) {
    double u1 = 1.0 - uniform01(s.next());  // (0, 1]
    double u2 = uniform01(s.next());
    double r = std::sqrt(-2.0 * std::log(u1));
    g0 = r * std::cos(6.283185307179586 * u2);
    g1 = r * std::sin(6.283185307179586 * u2);
}

}  // namespace lensless
