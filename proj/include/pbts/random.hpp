#pragma once

#include <cstdint>
#include <random>

namespace pbts {

using Rng = std::mt19937_64;

// Independent randomness per pipeline stage. Each stage draws from its own
// stream so toggling one stage never shifts the draws seen by another.
enum class Stream : std::uint32_t {
  kModelInit = 1,
  kTransform = 2,
  kTieBreak = 3,
  kUpdate = 4,
  kPlacement = 5,
  kSegmentation = 6,
};

// Deterministic child generator for (seed, stream, a, b). `a` and `b` are
// typically a frame index and a patch/candidate index.
inline Rng derive_rng(std::uint64_t seed, Stream stream, std::uint64_t a = 0,
                      std::uint64_t b = 0) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), static_cast<std::uint32_t>(stream),
                    lo(a),    hi(a),    lo(b),
                    hi(b)};
  return Rng(seq);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(rng);
}

// Laplace(0, scale) as an exponential magnitude with a fair random sign.
inline double sample_laplace(Rng& rng, double scale) {
  std::exponential_distribution<double> magnitude(1.0 / scale);
  std::bernoulli_distribution sign(0.5);
  const double m = magnitude(rng);
  return sign(rng) ? m : -m;
}

}  // namespace pbts
