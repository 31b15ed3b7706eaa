#pragma once

#include <cstdint>
#include <random>

#include "breed/types.hpp"

namespace breed {

// Named RNG streams derived from the single run seed, so that modules
// consume independent, reproducible sequences.
enum class Stream : std::uint64_t {
    initial_draw = 0x9e3779b97f4a7c15ull,
    nn_init = 0xbf58476d1ce4e5b9ull,
    reservoir = 0x94d049bb133111ebull,
    sampler = 0xd6e8feb86659fd93ull,
    scheduler = 0xa5a5a5a5deadbeefull,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream) {
    return splitmix64(master ^ static_cast<std::uint64_t>(stream));
}

inline std::mt19937_64 seeded_engine(std::uint64_t master, Stream stream) {
    return std::mt19937_64(derive_seed(master, stream));
}

inline SimParams uniform_params(const Bounds& bounds, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(bounds.low, bounds.high);
    SimParams p;
    for (int d = 0; d < kParamDim; ++d) p[d] = dist(rng);
    return p;
}

}  // namespace breed
