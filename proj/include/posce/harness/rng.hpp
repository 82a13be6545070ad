#pragma once

// Seed splitting. Every trial owns independent streams keyed by
// (root seed, trial index, stream tag), so results do not depend on which
// worker runs a trial or in what order.

#include <cstdint>
#include <random>

namespace posce::harness {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum class Stream : std::uint64_t {
  channel = 1,
  data = 2,
  noise = 3,
  pilots = 4,
};

inline std::uint64_t stream_seed(std::uint64_t root, std::uint64_t trial, Stream tag) {
  return splitmix64(splitmix64(splitmix64(root) ^ trial) ^ static_cast<std::uint64_t>(tag));
}

inline std::mt19937_64 make_stream(std::uint64_t root, std::uint64_t trial, Stream tag) {
  return std::mt19937_64(stream_seed(root, trial, tag));
}

}  // namespace posce::harness
