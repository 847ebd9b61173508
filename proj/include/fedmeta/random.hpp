#pragma once

#include <cstdint>
#include <random>

namespace fedmeta {

using Rng = std::mt19937_64;

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Child seed as a pure function of (master, stream, index). Streams keep
/// unrelated consumers (agents, trials, initializers) from sharing draws, and
/// trial i's seed never depends on how many trials are requested.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                    std::uint64_t index = 0) noexcept {
    return mix64(mix64(mix64(master) ^ stream) ^ index);
}

namespace stream {
inline constexpr std::uint64_t init = 0x1001;
inline constexpr std::uint64_t agent = 0x2002;
inline constexpr std::uint64_t task = 0x3003;
inline constexpr std::uint64_t trial = 0x4004;
inline constexpr std::uint64_t random_init = 0x5005;
inline constexpr std::uint64_t imaml = 0x6006;
} // namespace stream

} // namespace fedmeta
