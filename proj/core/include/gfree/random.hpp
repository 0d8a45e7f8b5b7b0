#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "gfree/types.hpp"

namespace gfree {

/// splitmix64 finalizer. Stable across platforms, used for every seed derivation.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives a child seed from a parent and an ordered list of coordinates.
/// Changing any coordinate changes the result; order matters.
inline std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> coords) noexcept {
  std::uint64_t h = mix64(parent);
  for (std::uint64_t c : coords) h = mix64(h ^ mix64(c + 0x632be59bd9b4e019ULL));
  return h;
}

/// Named sub-streams of one trial. Receivers never draw randomness, so adding
/// a receiver cannot perturb the channel draws.
enum class Stream : std::uint64_t {
  kTopology = 1,
  kShadowing = 2,
  kChannel = 3,
  kBits = 4,
  kNoise = 5,
  kPilots = 6,
};

inline std::uint64_t stream_seed(std::uint64_t trial_seed, Stream s) noexcept {
  return derive_seed(trial_seed, {static_cast<std::uint64_t>(s)});
}

using Rng = std::mt19937_64;

/// Circularly-symmetric complex normal with E|z|^2 = variance.
inline cplx complex_normal(Rng& rng, double variance = 1.0) {
  std::normal_distribution<double> n01(0.0, 1.0);
  const double s = std::sqrt(variance / 2.0);
  const double re = n01(rng);
  const double im = n01(rng);
  return {s * re, s * im};
}

inline CMatrix complex_normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double variance = 1.0) {
  CMatrix out(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) out(r, c) = complex_normal(rng, variance);
  return out;
}

}  // namespace gfree
