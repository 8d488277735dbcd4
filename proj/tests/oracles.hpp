#pragma once

// Test-only reference implementations, written independently of the
// production code paths they check.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "pbts/colour_model.hpp"
#include "pbts/geometry.hpp"

namespace pbts::oracle {

// The init sampling loop for a given visiting order, spelled out naively.
inline std::vector<CentreCount> sample_in_order(const std::vector<Rgb>& px,
                                                const std::vector<std::size_t>& order, double radius) {
  std::vector<CentreCount> out;
  for (std::size_t i : order) {
    const Rgb& p = px[i];
    std::vector<double> d;
    for (const auto& pc : out) {
      d.push_back(std::pow(p.r - pc.centre.r, 2) + std::pow(p.g - pc.centre.g, 2) +
                  std::pow(p.b - pc.centre.b, 2));
    }
    std::size_t best = out.size();
    for (std::size_t s = 0; s < d.size(); ++s) {
      if (d[s] < radius * radius && (best == out.size() || d[s] < d[best])) best = s;
    }
    if (best == out.size()) {
      out.push_back({{double(p.r), double(p.g), double(p.b)}, 1.0});
    } else {
      out[best].count += 1.0;
    }
  }
  return out;
}

// O(|pixels| * S) double loop: all distances first, then the first minimum
// among those strictly inside the radius.
inline std::vector<int> brute_force_counts(const PatchModel& m, const std::vector<Rgb>& px) {
  std::vector<int> counts(m.pairs.size(), 0);
  for (const Rgb& p : px) {
    std::vector<double> d(m.pairs.size());
    for (std::size_t s = 0; s < m.pairs.size(); ++s) {
      const auto& c = m.pairs[s].centre;
      d[s] = (p.r - c.r) * (p.r - c.r) + (p.g - c.g) * (p.g - c.g) + (p.b - c.b) * (p.b - c.b);
    }
    int best = -1;
    for (std::size_t s = 0; s < d.size(); ++s) {
      if (!(d[s] < m.radius * m.radius)) continue;
      if (best < 0 || d[s] < d[static_cast<std::size_t>(best)]) best = static_cast<int>(s);
    }
    if (best >= 0) ++counts[static_cast<std::size_t>(best)];
  }
  return counts;
}

struct Instance {
  PatchModel model;
  std::vector<Rgb> pixels;
};

// 1-10 real-valued centres and 25 pixels in a shared colour range dense
// enough that many pixels fall within range of two or more centres.
template <class Gen>
Instance random_instance(Gen& gen) {
  std::uniform_int_distribution<int> n_centres(1, 10);
  std::uniform_real_distribution<double> coord(0.0, 90.0);
  std::uniform_real_distribution<double> count(0.05, 10.0);
  std::uniform_int_distribution<int> ch(0, 90);
  std::bernoulli_distribution integral(0.3);
  Instance inst;
  inst.model.radius = 20.0;
  inst.model.size = {5, 5};
  const int s = n_centres(gen);
  for (int i = 0; i < s; ++i) {
    ColourCentre c{coord(gen), coord(gen), coord(gen)};
    if (integral(gen)) c = {std::round(c.r), std::round(c.g), std::round(c.b)};
    inst.model.pairs.push_back({c, count(gen)});
  }
  for (int i = 0; i < 25; ++i) {
    inst.pixels.push_back({static_cast<std::uint8_t>(ch(gen)), static_cast<std::uint8_t>(ch(gen)),
                           static_cast<std::uint8_t>(ch(gen))});
  }
  return inst;
}

// A model and a pixel set that reproduces it exactly: h_s pixels sitting on
// each centre, centres more than 2R apart.
template <class Gen>
Instance random_fixed_point(Gen& gen) {
  static const ColourCentre lattice[] = {{0, 0, 0},     {0, 0, 120},   {0, 120, 0},   {120, 0, 0},
                                         {120, 120, 0}, {120, 0, 120}, {0, 120, 120}, {120, 120, 120},
                                         {240, 0, 0},   {0, 240, 0}};
  std::uniform_int_distribution<int> n_centres(1, 8);
  std::uniform_int_distribution<int> jitter(0, 30);
  Instance inst;
  inst.model.radius = 20.0;
  const int s = n_centres(gen);
  int remaining = 25;
  for (int i = 0; i < s && remaining > 0; ++i) {
    ColourCentre c = lattice[i];
    c.r += jitter(gen);
    c.g += jitter(gen);
    c.b += jitter(gen);
    const int h = std::uniform_int_distribution<int>(1, std::max(1, remaining / (s - i)))(gen);
    remaining -= h;
    inst.model.pairs.push_back({c, double(h)});
    for (int k = 0; k < h; ++k) {
      inst.pixels.push_back({static_cast<std::uint8_t>(c.r), static_cast<std::uint8_t>(c.g),
                             static_cast<std::uint8_t>(c.b)});
    }
  }
  std::shuffle(inst.pixels.begin(), inst.pixels.end(), gen);
  return inst;
}

// Pixel-counting IoU for integer boxes.
inline double raster_iou(const Box& a, const Box& b) {
  const int x0 = static_cast<int>(std::min(a.x, b.x)), x1 = static_cast<int>(std::max(a.right(), b.right()));
  const int y0 = static_cast<int>(std::min(a.y, b.y)), y1 = static_cast<int>(std::max(a.bottom(), b.bottom()));
  long inter = 0, uni = 0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const double cx = x + 0.5, cy = y + 0.5;
      const bool ina = cx > a.x && cx < a.right() && cy > a.y && cy < a.bottom();
      const bool inb = cx > b.x && cx < b.right() && cy > b.y && cy < b.bottom();
      inter += ina && inb;
      uni += ina || inb;
    }
  }
  return uni == 0 ? 0.0 : double(inter) / double(uni);
}

// Hand simulation of the supervised loop: `hit(t)` says whether the tracker's
// answer on frame t overlaps the truth. Returns init and failure frames.
struct Timeline {
  std::vector<std::size_t> inits, failures;
};

template <class Hit>
Timeline simulate_supervised(std::size_t frames, std::size_t skip, Hit hit) {
  Timeline tl;
  std::size_t t = 0;
  while (t < frames) {
    tl.inits.push_back(t);
    std::size_t u = t + 1;
    while (u < frames && hit(u)) ++u;
    if (u >= frames) break;
    tl.failures.push_back(u);
    t = u + skip;
  }
  return tl;
}

}  // namespace pbts::oracle
