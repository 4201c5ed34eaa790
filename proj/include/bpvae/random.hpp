#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace bpvae {

using Rng = std::mt19937_64;

// splitmix64 finalizer; derives independent stream seeds from one run seed.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline void fill_standard_normal(Rng& rng, std::span<float> out) {
  std::normal_distribution<float> normal(0.0f, 1.0f);
  for (auto& v : out) v = normal(rng);
}

}  // namespace bpvae
