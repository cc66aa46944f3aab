#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace ivv {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Key of a counter-based substream: depends only on the seed and the ids, not on call order.
inline std::uint64_t substream_key(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
    std::uint64_t h = splitmix64(seed);
    for (auto id : ids) h = splitmix64(h ^ splitmix64(id + 0x632be59bd9b4e019ULL));
    return h;
}

using Rng = std::mt19937_64;

inline Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
    return Rng(substream_key(seed, ids));
}

// Stream tags so that different consumers of one seed never overlap.
enum StreamTag : std::uint64_t {
    kTagBootstrap = 0xB0075,
    kTagSample = 0x5A3,
    kTagParams = 0x9A7A,
};

}  // namespace ivv
