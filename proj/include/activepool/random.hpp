#pragma once

#include <cstdint>
#include <random>

namespace activepool {

/// Random stream used throughout. Every stochastic operation takes one by
/// reference so the caller owns reproducibility.
using Rng = std::mt19937_64;

/// Independent stream for replicate `stream` of an experiment seeded with
/// `seed`. Equal (seed, stream) pairs always produce the same sequence.
inline Rng make_substream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace activepool
