#pragma once

#include "filterstab/noise.hpp"

#include <cstdint>

namespace filterstab {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Counter-based split: splitmix64(splitmix64(master) ^ trial). splitmix64 is
/// a bijection, so distinct trials of one run never share a seed.
inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t trial) noexcept
{
    return splitmix64(splitmix64(master) ^ trial);
}

inline Rng trial_rng(std::uint64_t master, std::uint64_t trial)
{
    return Rng(derive_seed(master, trial));
}

} // namespace filterstab
