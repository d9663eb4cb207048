#pragma once

// Deterministic sharded Monte Carlo helpers. A run of N samples is cut into
// a fixed number of shards, each with its own derived seed; reductions walk
// the shards in ascending index order so a (seed, N, shard count) triple
// always reproduces the same bits.

#include <cstdint>
#include <random>
#include <vector>

namespace capnet {

inline constexpr int kDefaultShards = 8;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 1));
}

/// Sample counts per shard; the first N % shards shards get one extra.
inline std::vector<long> shard_sizes(long n_samples, int shards) {
  std::vector<long> sizes(static_cast<std::size_t>(shards), n_samples / shards);
  for (long i = 0; i < n_samples % shards; ++i) ++sizes[std::size_t(i)];
  return sizes;
}

using Rng = std::mt19937_64;

}  // namespace capnet
