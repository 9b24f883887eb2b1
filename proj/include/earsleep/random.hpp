#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace earsleep {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent child seeds from a parent
/// seed and a tag path (tree index, night index, ...).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = mix64(seed);
  for (auto t : tags) s = mix64(s ^ mix64(t));
  return s;
}

}  // namespace earsleep
