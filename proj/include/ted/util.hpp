#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace ted {

/// 64-bit FNV-1a. Used for text keys, fingerprints and caption->component maps.
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent generator per (seed, stream) so that subsystems sharing a run seed
/// do not consume each other's draws.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    return std::mt19937_64(splitmix64(seed ^ splitmix64(stream + 0x5851f42d4c957f2dULL)));
}

/// Lower-case 16-digit hex.
std::string hex64(std::uint64_t v);

/// Key under which hidden-state dumps are stored for a text: hex64(fnv1a64(utf8 text)).
inline std::string text_key(std::string_view text) { return hex64(fnv1a64(text)); }

} // namespace ted
