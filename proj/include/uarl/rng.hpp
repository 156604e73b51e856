#pragma once

#include <cstdint>
#include <random>

namespace uarl {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for sub-stream `index` of stream `stream` under `master`.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                    std::uint64_t index = 0) noexcept {
  return mix_seed(mix_seed(mix_seed(master) ^ stream) ^ index);
}

// Stream identifiers, so that adding a consumer never shifts another stream.
namespace stream {
inline constexpr std::uint64_t kEpisodes = 1;
inline constexpr std::uint64_t kInit = 2;
inline constexpr std::uint64_t kNominalBatch = 3;
inline constexpr std::uint64_t kRepulsiveBatch = 4;
inline constexpr std::uint64_t kTargetNoise = 5;
inline constexpr std::uint64_t kDiversityNoise = 6;
inline constexpr std::uint64_t kEval = 7;
inline constexpr std::uint64_t kIdRollouts = 8;
inline constexpr std::uint64_t kCurriculum = 9;
inline constexpr std::uint64_t kExploration = 10;
}  // namespace stream

}  // namespace uarl
