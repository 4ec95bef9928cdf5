#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace oodkit {

using Rng = std::mt19937_64;

/// splitmix64 mixing step; used to derive decorrelated child seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Child seed for a named pipeline stage.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view stream) {
    return splitmix64(master ^ fnv1a64(stream));
}

/// Child seed for a per-item stream (e.g. one per training sample).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(splitmix64(master) ^ (index + 1));
}

inline Rng derive_rng(std::uint64_t master, std::string_view stream) {
    return Rng(derive_seed(master, stream));
}

inline Rng derive_rng(std::uint64_t master, std::uint64_t index) {
    return Rng(derive_seed(master, index));
}

}  // namespace oodkit
