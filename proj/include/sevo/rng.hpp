#pragma once

#include <cstdint>
#include <string_view>

namespace sevo {

/// Name recorded in run manifests for the per-path seed derivation below.
inline constexpr std::string_view kSeedRule = "splitmix64(master ^ splitmix64(path_index + 1))";

constexpr std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Counter-based seed of one sample path; independent of the order paths are visited in.
constexpr std::uint64_t path_seed(std::uint64_t master, std::uint64_t path_index)
{
    return splitmix64(master ^ splitmix64(path_index + 1));
}

}  // namespace sevo
