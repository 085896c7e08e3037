#pragma once

// Counter-based uniform draws from the SplitMix64 finalizer: the value for
// (seed, stream, counter) does not depend on evaluation order, so parallel
// sampling is reproducible.

#include <cstdint>

namespace pilotwave::random {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Uniform in [0, 1) with 53 random bits.
inline double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    constexpr std::uint64_t golden = 0x9e3779b97f4a7c15ULL;
    const std::uint64_t key = splitmix64(seed + golden * (stream + 1));
    return static_cast<double>(splitmix64(key + golden * (counter + 1)) >> 11) * 0x1.0p-53;
}

}  // namespace pilotwave::random
