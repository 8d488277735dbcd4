#pragma once

// Sparse colour-sample patch model.
//
// A patch is described by a handful of RGB samples ("centres") drawn from its
// own pixels, each paired with the number of patch pixels lying within a fixed
// radius R of it. Matching a candidate region counts, per centre, the pixels
// whose nearest centre within R is that centre; similarity is a Bhattacharyya
// coefficient raised through the exponent b.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "pbts/image.hpp"
#include "pbts/random.hpp"

namespace pbts {

struct ColourCentre {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  static ColourCentre from(const Rgb& p) noexcept {
    return {static_cast<double>(p.r), static_cast<double>(p.g), static_cast<double>(p.b)};
  }

  friend bool operator==(const ColourCentre&, const ColourCentre&) = default;
};

inline double distance_sq(const Rgb& p, const ColourCentre& c) noexcept {
  const double dr = p.r - c.r;
  const double dg = p.g - c.g;
  const double db = p.b - c.b;
  return dr * dr + dg * dg + db * db;
}

struct CentreCount {
  ColourCentre centre;
  double count = 0.0;

  friend bool operator==(const CentreCount&, const CentreCount&) = default;
};

struct PatchSize {
  int w = 5;
  int h = 5;

  int area() const noexcept { return w * h; }
  friend bool operator==(const PatchSize&, const PatchSize&) = default;
};

struct PatchModel {
  Point2 location;
  std::vector<CentreCount> pairs;
  PatchSize size;
  double radius = 20.0;

  friend bool operator==(const PatchModel&, const PatchModel&) = default;
};

// Match counts aligned to a model's pairs, divided by the patch area.
struct MatchHistogram {
  std::vector<double> counts;

  double total() const noexcept { return std::accumulate(counts.begin(), counts.end(), 0.0); }
};

// Index of the closest centre strictly within `radius`, or -1. Exact distance
// ties resolve to the lowest index.
inline int closest_centre(const Rgb& pixel, std::span<const CentreCount> pairs,
                          double radius) noexcept {
  const double limit = radius * radius;
  int best = -1;
  double best_d = limit;
  for (std::size_t s = 0; s < pairs.size(); ++s) {
    const double d = distance_sq(pixel, pairs[s].centre);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(s);
    }
  }
  return best;
}

namespace detail {

// The stochastic pseudo-clustering loop: visit every pixel once in random
// order; a pixel either increments its nearest matching centre or becomes a
// new centre with count 1. No cap on the number of centres.
inline std::vector<CentreCount> sample_centres(std::span<const Rgb> pixels, double radius,
                                               Rng& rng) {
  std::vector<std::size_t> order(pixels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<CentreCount> pairs;
  for (std::size_t i : order) {
    const int s = closest_centre(pixels[i], pairs, radius);
    if (s >= 0) {
      pairs[static_cast<std::size_t>(s)].count += 1.0;
    } else {
      pairs.push_back({ColourCentre::from(pixels[i]), 1.0});
    }
  }
  return pairs;
}

inline void prune_to(std::vector<CentreCount>& pairs, std::size_t s_max, Rng& rng) {
  std::vector<std::size_t> lowest;
  while (pairs.size() > s_max) {
    const auto min_it = std::min_element(pairs.begin(), pairs.end(),
                                         [](const auto& a, const auto& b) { return a.count < b.count; });
    lowest.clear();
    for (std::size_t s = 0; s < pairs.size(); ++s) {
      if (pairs[s].count == min_it->count) lowest.push_back(s);
    }
    const std::size_t victim = lowest.size() == 1 ? lowest[0] : lowest[uniform_index(rng, lowest.size())];
    pairs.erase(pairs.begin() + static_cast<std::ptrdiff_t>(victim));
  }
}

inline double clamp_channel(double v) noexcept { return std::clamp(v, 0.0, 255.0); }

}  // namespace detail

inline PatchModel init_model(std::span<const Rgb> pixels, PatchSize size, double radius,
                             std::size_t s_max, Rng& rng) {
  if (pixels.empty()) throw std::domain_error("init_model: no pixels");
  if (!(radius > 0.0)) throw std::domain_error("init_model: radius must be positive");
  if (s_max < 1) throw std::domain_error("init_model: S_max must be at least 1");

  PatchModel model;
  model.size = size;
  model.radius = radius;
  model.pairs = detail::sample_centres(pixels, radius, rng);
  detail::prune_to(model.pairs, s_max, rng);
  return model;
}

// Integer match counts per centre, written into `counts` (resized to the
// number of pairs). Pixels matching nothing are ignored.
inline void count_matches(const PatchModel& model, std::span<const Rgb> pixels,
                          std::vector<int>& counts) {
  counts.assign(model.pairs.size(), 0);
  for (const Rgb& p : pixels) {
    const int s = closest_centre(p, model.pairs, model.radius);
    if (s >= 0) ++counts[static_cast<std::size_t>(s)];
  }
}

inline MatchHistogram match_counts(const PatchModel& model, std::span<const Rgb> pixels) {
  std::vector<int> raw;
  count_matches(model, pixels, raw);
  const double area = model.size.area();
  MatchHistogram h;
  h.counts.reserve(raw.size());
  for (int c : raw) h.counts.push_back(c / area);
  return h;
}

// The model's own counts under the same fixed patch-area normalisation.
inline MatchHistogram self_histogram(const PatchModel& model) {
  const double area = model.size.area();
  MatchHistogram h;
  h.counts.reserve(model.pairs.size());
  for (const auto& pc : model.pairs) h.counts.push_back(pc.count / area);
  return h;
}

inline double bhattacharyya_coefficient(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::domain_error("bhattacharyya_coefficient: length mismatch");
  double bc = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) bc += std::sqrt(p[j] * q[j]);
  return bc;
}

inline double bhattacharyya_coefficient(const MatchHistogram& p, const MatchHistogram& q) {
  return bhattacharyya_coefficient(std::span<const double>(p.counts),
                                   std::span<const double>(q.counts));
}

// Modified Bhattacharyya distance (1 - BC)^b. Rounding can push BC a hair
// above 1, so the base is floored at 0.
inline double mbd_from_bc(double bc, double b) {
  const double base = 1.0 - bc;
  if (base <= 0.0) return 0.0;
  return std::pow(base, b);
}

inline double mbd(const MatchHistogram& p, const MatchHistogram& q, double b) {
  return mbd_from_bc(bhattacharyya_coefficient(p, q), b);
}

inline double patch_quality(const PatchModel& model, std::span<const Rgb> candidate_pixels,
                            double b) {
  return 1.0 - mbd(self_histogram(model), match_counts(model, candidate_pixels), b);
}

inline double object_quality(std::span<const double> qualities) {
  if (qualities.empty()) throw std::domain_error("object_quality: no patches");
  return std::accumulate(qualities.begin(), qualities.end(), 0.0) /
         static_cast<double>(qualities.size());
}

// Dual-rate update from the pixels found at the patch's predicted location.
// Counts interpolate at beta_c, centres move towards (or past, beta_s > 1)
// their matched means, unmatched pixels seed new pairs scaled by beta_c, and
// every pair below beta_c is dropped.
inline PatchModel update_model(const PatchModel& model, std::span<const Rgb> matched_pixels,
                               double beta_c, double beta_s, Rng& rng) {
  if (beta_c < 0.0 || beta_c > 1.0) throw std::domain_error("update_model: beta_c outside [0,1]");
  if (beta_s < 0.0) throw std::domain_error("update_model: beta_s negative");

  const std::size_t n_pairs = model.pairs.size();
  std::vector<int> hits(n_pairs, 0);
  std::vector<ColourCentre> sums(n_pairs);
  std::vector<Rgb> unmatched;
  for (const Rgb& p : matched_pixels) {
    const int s = closest_centre(p, model.pairs, model.radius);
    if (s < 0) {
      unmatched.push_back(p);
      continue;
    }
    auto& acc = sums[static_cast<std::size_t>(s)];
    acc.r += p.r;
    acc.g += p.g;
    acc.b += p.b;
    ++hits[static_cast<std::size_t>(s)];
  }

  PatchModel out = model;
  for (std::size_t s = 0; s < n_pairs; ++s) {
    auto& pc = out.pairs[s];
    pc.count = beta_c * hits[s] + (1.0 - beta_c) * pc.count;
    if (hits[s] > 0) {
      const double inv = 1.0 / hits[s];
      pc.centre.r = detail::clamp_channel(beta_s * sums[s].r * inv + (1.0 - beta_s) * pc.centre.r);
      pc.centre.g = detail::clamp_channel(beta_s * sums[s].g * inv + (1.0 - beta_s) * pc.centre.g);
      pc.centre.b = detail::clamp_channel(beta_s * sums[s].b * inv + (1.0 - beta_s) * pc.centre.b);
    }
  }

  if (!unmatched.empty()) {
    for (auto& born : detail::sample_centres(unmatched, model.radius, rng)) {
      born.count *= beta_c;
      if (born.count > 0.0) out.pairs.push_back(born);
    }
  }

  std::erase_if(out.pairs, [beta_c](const CentreCount& pc) { return pc.count < beta_c; });
  return out;
}

}  // namespace pbts
