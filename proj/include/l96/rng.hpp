#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace l96 {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Named sub-seed of a master seed ("truth", "fits", "enkf", ...).
constexpr std::uint64_t sub_seed(std::uint64_t master, std::string_view name) {
  return mix64(master ^ mix64(hash_name(name)));
}

// Indexed sub-seed, e.g. one stream per component or ensemble member.
constexpr std::uint64_t sub_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(master + mix64(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

inline double standard_normal(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return n(rng);
}

}  // namespace l96
