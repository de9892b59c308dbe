// Deterministic sampling helpers. All randomness in the library flows through
// these so that identical seeds give identical results on any platform.
#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "dwm/errors.hpp"

namespace dwm {

using Rng = std::mt19937_64;

// SplitMix64-style mixing, used to derive independent stream seeds from a
// master seed plus an index (episode number, row number, ...).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Uniform double in [0, 1) built from the top 53 bits of one engine draw.
// Unlike std::uniform_real_distribution this is pinned to the engine output,
// not to the standard library implementation.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Uniform integer in [0, n).
inline int uniform_below(Rng& rng, int n) {
  int k = static_cast<int>(uniform01(rng) * n);
  return k < n ? k : n - 1;
}

// Index drawn proportionally to weights (inverse-CDF walk). `total` is the
// caller-known weight sum; the last positive weight absorbs rounding slack.
inline int sample_weighted(std::span<const double> weights, double total, Rng& rng) {
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  int last_positive = -1;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = static_cast<int>(i);
    acc += weights[i];
    if (u < acc) return last_positive;
  }
  if (last_positive < 0) throw NumericalError("sample_weighted: no positive weight");
  return last_positive;
}

}  // namespace dwm
