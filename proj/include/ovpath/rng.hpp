#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ovpath {

/// SplitMix64 finalizer; used to derive independent, order-free RNG streams.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename... Ts>
constexpr std::uint64_t derive_seed(std::uint64_t seed, Ts... parts) {
  std::uint64_t s = mix64(seed);
  ((s = mix64(s ^ static_cast<std::uint64_t>(parts))), ...);
  return s;
}

inline std::mt19937_64 make_rng(std::uint64_t derived) { return std::mt19937_64(derived); }

}  // namespace ovpath
