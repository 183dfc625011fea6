#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "gaplab/vec.hpp"

namespace gaplab {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent streams from one master seed.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0) {
  return mix64(mix64(master ^ mix64(stream)) + index);
}

/// Named stream tags so every consumer of the master seed draws from its own sequence.
enum class Stream : std::uint64_t {
  chain = 1,
  probes = 2,
  training = 3,
  metrics = 4,
  reference_data = 5,
  init = 6,
  replicate = 7,
};

constexpr std::uint64_t derive_seed(std::uint64_t master, Stream s, std::uint64_t index = 0) {
  return derive_seed(master, static_cast<std::uint64_t>(s), index);
}

inline Vec standard_normal(Rng& rng, std::size_t dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec z(dim);
  for (double& v : z) v = n(rng);
  return z;
}

}  // namespace gaplab
