#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace consist {

// The standard distributions are implementation-defined, so sampling is done
// here on top of the (fully specified) mt19937_64 bit stream. This keeps every
// seeded result identical across standard libraries.
using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Independent, replayable sub-seed for stream `stream` of a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
    return splitmix64(splitmix64(master) ^ splitmix64(stream + 0xD1B54A32D192ED03ULL));
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(Engine& engine) noexcept {
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n), unbiased (rejection sampling). n must be > 0.
inline std::size_t uniform_index(Engine& engine, std::size_t n) noexcept {
    const std::uint64_t bound = n;
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t draw = engine();
    while (draw >= limit) {
        draw = engine();
    }
    return static_cast<std::size_t>(draw % bound);
}

}  // namespace consist
