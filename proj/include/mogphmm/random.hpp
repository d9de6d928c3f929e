#pragma once

#include <cstdint>
#include <random>

namespace mogphmm {

// All stochastic code draws from an explicitly passed engine; nothing touches
// global state. mt19937_64 sequences are fixed by the standard, which keeps
// seeded runs reproducible.
using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent child seed for stream `stream` of a run seeded with `base`.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept
{
    return splitmix64(splitmix64(base) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

inline double uniform01(Rng& rng)
{
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n)
{
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

} // namespace mogphmm
