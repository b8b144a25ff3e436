#pragma once

#include <cstdint>
#include <random>

namespace ctrace {

using Engine = std::mt19937_64;

/// SplitMix64 finalizer; used only to derive well-separated sub-seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Sub-stream seed for (root, trial, role):
///   s = splitmix64(splitmix64(splitmix64(root) ^ trial) ^ role)
/// Streams depend only on these three values, so trials can run in any order.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t trial,
                                    std::uint64_t role) noexcept {
  return splitmix64(splitmix64(splitmix64(root) ^ trial) ^ role);
}

inline Engine make_stream(std::uint64_t root, std::uint64_t trial, std::uint64_t role) {
  return Engine(derive_seed(root, trial, role));
}

} // namespace ctrace
