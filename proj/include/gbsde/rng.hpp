#pragma once

#include <cstdint>

namespace gbsde {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic stream seed for a (component, index) pair; independent of
/// scheduling, so parallel runs reproduce sequential ones bit for bit.
inline uint64_t mix_seed(uint64_t base, uint64_t a, uint64_t b = 0) {
    uint64_t s = base;
    uint64_t h = splitmix64(s);
    s ^= a + 0x428a2f98d728ae22ULL + (h << 1);
    h = splitmix64(s);
    s ^= b + 0x7137449123ef65cdULL + (h << 1);
    return splitmix64(s);
}

}  // namespace gbsde
