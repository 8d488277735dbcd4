#pragma once

// First-frame patch placement: find the likely-object pixels inside the given
// box, over-segment them into superpixels with SLICO, and drop patches onto
// superpixel centroids, largest first, under a pairwise overlap bound.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <vector>

#include "pbts/colour_model.hpp"
#include "pbts/geometry.hpp"
#include "pbts/image.hpp"
#include "pbts/random.hpp"

namespace pbts {

struct SegmenterConfig {
  double rho_minus = 0.8;
  double rho_plus = 1.2;
  double tau = 0.85;
  double lambda = 1e-2;

  friend bool operator==(const SegmenterConfig&, const SegmenterConfig&) = default;
};

// Integer pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const noexcept { return x1 - x0; }
  int height() const noexcept { return y1 - y0; }
  bool empty() const noexcept { return x1 <= x0 || y1 <= y0; }
  bool contains(int x, int y) const noexcept { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

// Pixels whose centres (integer coordinates) fall in [x, x + w) x [y, y + h),
// clipped to the image.
inline PixelRect rasterise(const Box& b, int image_w, int image_h) {
  PixelRect r;
  r.x0 = std::clamp(static_cast<int>(std::ceil(b.x)), 0, image_w);
  r.y0 = std::clamp(static_cast<int>(std::ceil(b.y)), 0, image_h);
  r.x1 = std::clamp(static_cast<int>(std::ceil(b.right())), 0, image_w);
  r.y1 = std::clamp(static_cast<int>(std::ceil(b.bottom())), 0, image_h);
  if (r.x1 < r.x0) r.x1 = r.x0;
  if (r.y1 < r.y0) r.y1 = r.y0;
  return r;
}

// Binary raster over an image-space rectangle; true marks likely object.
struct ObjectMask {
  PixelRect region;
  std::vector<std::uint8_t> data;

  static ObjectMask all_true(PixelRect region) {
    return {region, std::vector<std::uint8_t>(
                        static_cast<std::size_t>(region.width()) * region.height(), 1)};
  }

  int width() const noexcept { return region.width(); }
  int height() const noexcept { return region.height(); }

  // Image coordinates; false outside the region.
  bool at(int x, int y) const noexcept {
    if (!region.contains(x, y)) return false;
    return data[static_cast<std::size_t>(y - region.y0) * width() + (x - region.x0)] != 0;
  }
  void set(int x, int y, bool v) noexcept {
    data[static_cast<std::size_t>(y - region.y0) * width() + (x - region.x0)] = v ? 1 : 0;
  }
  std::size_t count() const noexcept {
    return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
  }
};

namespace detail {

inline Box scale_about_centre(const Box& b, double factor) {
  const Point2 c = b.centre();
  return {c.x - 0.5 * b.w * factor, c.y - 0.5 * b.h * factor, b.w * factor, b.h * factor};
}

// Gaussian kernel density over a sample model, normalised by its pixel total.
// Smooth so that colours absent from one model's samples but typical of its
// distribution still score against it.
inline double model_density(const Rgb& p, std::span<const CentreCount> pairs, double total,
                            double sigma) {
  if (total <= 0.0) return 0.0;
  const double k = -0.5 / (sigma * sigma);
  double d = 0.0;
  for (const auto& pc : pairs) d += pc.count * std::exp(k * distance_sq(p, pc.centre));
  return d / total;
}

}  // namespace detail

// Stand-in object segmenter. Two colour-sample models are built: one from
// the box shrunk by rho_minus (object prior) and one from the ring between
// the box and the box grown by rho_plus (background prior). A pixel is
// object when its object share o / (o + b), from kernel densities of the two
// models, exceeds tau after ceil(1 / (100 lambda)) passes of a 3x3 mean.
inline ObjectMask segment_object(const Image& image, const Box& bbox, const SegmenterConfig& cfg,
                                 Rng& rng, double radius = 20.0) {
  const PixelRect region = rasterise(bbox, image.width(), image.height());
  if (region.empty()) throw std::domain_error("segment_object: box does not intersect image");
  if (region.width() < 3 || region.height() < 3) return ObjectMask::all_true(region);

  const PixelRect inner =
      rasterise(detail::scale_about_centre(bbox, cfg.rho_minus), image.width(), image.height());
  const PixelRect outer =
      rasterise(detail::scale_about_centre(bbox, cfg.rho_plus), image.width(), image.height());

  std::vector<Rgb> obj_px;
  std::vector<Rgb> bg_px;
  for (int y = outer.y0; y < outer.y1; ++y) {
    for (int x = outer.x0; x < outer.x1; ++x) {
      if (inner.contains(x, y)) {
        obj_px.push_back(image.at(x, y));
      } else if (!region.contains(x, y)) {
        bg_px.push_back(image.at(x, y));
      }
    }
  }
  if (obj_px.empty()) return ObjectMask::all_true(region);

  const auto obj_model = detail::sample_centres(obj_px, radius, rng);
  const auto bg_model = detail::sample_centres(bg_px, radius, rng);
  const double obj_total = static_cast<double>(obj_px.size());
  const double bg_total = static_cast<double>(bg_px.size());

  const int w = region.width();
  const int h = region.height();
  std::vector<double> score(static_cast<std::size_t>(w) * h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Rgb& p = image.at(region.x0 + x, region.y0 + y);
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double o = detail::model_density(p, obj_model, obj_total, radius);
      const double b = detail::model_density(p, bg_model, bg_total, radius);
      if (o > 0.0) score[i] = o / (o + b);
    }
  }

  const int passes = cfg.lambda > 0.0 ? static_cast<int>(std::ceil(1.0 / (100.0 * cfg.lambda))) : 0;
  std::vector<double> tmp(score.size());
  for (int pass = 0; pass < passes; ++pass) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double sum = 0.0;
        int n = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int xx = x + dx, yy = y + dy;
            if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
            sum += score[static_cast<std::size_t>(yy) * w + xx];
            ++n;
          }
        }
        tmp[static_cast<std::size_t>(y) * w + x] = sum / n;
      }
    }
    score.swap(tmp);
  }

  ObjectMask mask{region, std::vector<std::uint8_t>(score.size(), 0)};
  for (std::size_t i = 0; i < score.size(); ++i) {
    mask.data[i] = score[i] > cfg.tau ? 1 : 0;
  }
  if (static_cast<double>(mask.count()) < 0.05 * static_cast<double>(score.size())) {
    return ObjectMask::all_true(region);
  }
  return mask;
}

struct Lab {
  double l = 0.0;
  double a = 0.0;
  double b = 0.0;
};

// sRGB (D65) to CIELAB.
inline Lab rgb_to_lab(const Rgb& p) noexcept {
  auto linear = [](double c) {
    c /= 255.0;
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
  };
  const double r = linear(p.r), g = linear(p.g), b = linear(p.b);
  const double x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / 0.950456;
  const double y = (0.2126729 * r + 0.7151522 * g + 0.0721750 * b);
  const double z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / 1.088754;
  auto f = [](double t) {
    constexpr double eps = 0.008856;
    constexpr double kappa = 903.3;
    return t > eps ? std::cbrt(t) : (kappa * t + 16.0) / 116.0;
  };
  const double fx = f(x), fy = f(y), fz = f(z);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

// Label raster over a mask's region; -1 for unmasked pixels.
struct SuperpixelLabels {
  PixelRect region;
  std::vector<int> labels;
  int count = 0;

  int at(int x, int y) const noexcept {
    if (!region.contains(x, y)) return -1;
    return labels[static_cast<std::size_t>(y - region.y0) * region.width() + (x - region.x0)];
  }
};

namespace detail {

struct Seed {
  double l, a, b, x, y;
};

inline constexpr std::array<std::array<int, 2>, 4> kFourNeighbours{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};

// Splits every label into its 4-connected components. Each label keeps its
// largest component; the other (orphan) components are merged into the
// largest adjacent group. Returns the relabelled raster and the label count.
inline int enforce_connectivity(std::vector<int>& labels, int w, int h) {
  const std::size_t n = labels.size();
  std::vector<int> comp(n, -1);
  std::vector<int> comp_label;
  std::vector<std::vector<std::size_t>> comp_pixels;
  for (std::size_t start = 0; start < n; ++start) {
    if (labels[start] < 0 || comp[start] >= 0) continue;
    const int id = static_cast<int>(comp_label.size());
    comp_label.push_back(labels[start]);
    comp_pixels.emplace_back();
    auto& pix = comp_pixels.back();
    std::queue<std::size_t> q;
    q.push(start);
    comp[start] = id;
    while (!q.empty()) {
      const std::size_t i = q.front();
      q.pop();
      pix.push_back(i);
      const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
      for (const auto& d : kFourNeighbours) {
        const int xx = x + d[0], yy = y + d[1];
        if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
        const std::size_t j = static_cast<std::size_t>(yy) * w + xx;
        if (comp[j] < 0 && labels[j] == labels[start]) {
          comp[j] = id;
          q.push(j);
        }
      }
    }
  }

  const int n_comp = static_cast<int>(comp_label.size());
  if (n_comp == 0) return 0;
  const int max_label = *std::max_element(comp_label.begin(), comp_label.end());
  std::vector<int> main_comp(static_cast<std::size_t>(max_label) + 1, -1);
  for (int c = 0; c < n_comp; ++c) {
    int& m = main_comp[static_cast<std::size_t>(comp_label[c])];
    if (m < 0 || comp_pixels[c].size() > comp_pixels[m].size()) m = c;
  }

  // group[c] = representative kept component, -1 while unresolved.
  std::vector<int> group(n_comp, -1);
  std::vector<std::size_t> group_size(n_comp, 0);
  for (int m : main_comp) {
    if (m >= 0) {
      group[m] = m;
      group_size[m] = comp_pixels[m].size();
    }
  }
  std::vector<int> orphans;
  for (int c = 0; c < n_comp; ++c)
    if (group[c] < 0) orphans.push_back(c);
  std::stable_sort(orphans.begin(), orphans.end(), [&](int a, int b) {
    return comp_pixels[a].size() > comp_pixels[b].size();
  });

  while (!orphans.empty()) {
    bool progress = false;
    for (auto it = orphans.begin(); it != orphans.end();) {
      const int c = *it;
      int best = -1;
      for (std::size_t i : comp_pixels[c]) {
        const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
        for (const auto& d : kFourNeighbours) {
          const int xx = x + d[0], yy = y + d[1];
          if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
          const int other = comp[static_cast<std::size_t>(yy) * w + xx];
          if (other < 0 || other == c || group[other] < 0) continue;
          const int g = group[other];
          if (best < 0 || group_size[g] > group_size[best] ||
              (group_size[g] == group_size[best] && g < best))
            best = g;
        }
      }
      if (best >= 0) {
        group[c] = best;
        group_size[best] += comp_pixels[c].size();
        it = orphans.erase(it);
        progress = true;
      } else {
        ++it;
      }
    }
    if (!progress) {
      // Isolated from every kept group: the largest remaining orphan
      // becomes a group of its own.
      const int c = orphans.front();
      group[c] = c;
      group_size[c] = comp_pixels[c].size();
      orphans.erase(orphans.begin());
    }
  }

  // Consecutive labels in raster order of first appearance.
  std::vector<int> new_id(n_comp, -1);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0) continue;
    const int g = group[comp[i]];
    if (new_id[g] < 0) new_id[g] = next++;
    labels[i] = new_id[g];
  }
  return next;
}

}  // namespace detail

// Zero-parameter SLIC restricted to the mask's true pixels. Distances are
// measured in (L, a, b, x, y); each cluster normalises its colour term by its
// own largest colour distance from the previous iteration.
inline SuperpixelLabels slico_superpixels(const Image& image, const ObjectMask& mask, int target_k,
                                          int iterations = 10) {
  if (target_k < 1) throw std::domain_error("slico_superpixels: target_k must be >= 1");
  const PixelRect region = mask.region;
  const int w = region.width();
  const int h = region.height();
  const std::size_t n = static_cast<std::size_t>(w) * h;
  const std::size_t area = mask.count();
  if (area == 0) throw std::domain_error("slico_superpixels: empty mask");

  std::vector<Lab> lab(n);
  int mx0 = w, my0 = h, mx1 = -1, my1 = -1;
  double cx = 0.0, cy = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      lab[i] = rgb_to_lab(image.at(region.x0 + x, region.y0 + y));
      if (mask.data[i]) {
        mx0 = std::min(mx0, x);
        my0 = std::min(my0, y);
        mx1 = std::max(mx1, x);
        my1 = std::max(my1, y);
        cx += x;
        cy += y;
      }
    }
  }
  cx /= static_cast<double>(area);
  cy /= static_cast<double>(area);
  auto masked = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < w && y < h && mask.data[static_cast<std::size_t>(y) * w + x] != 0;
  };

  const int k_target = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(target_k), area));
  const double step = std::sqrt(static_cast<double>(area) / k_target);

  auto gradient = [&](int x, int y) {
    auto L = [&](int xx, int yy) {
      xx = std::clamp(xx, 0, w - 1);
      yy = std::clamp(yy, 0, h - 1);
      const Lab& c = lab[static_cast<std::size_t>(yy) * w + xx];
      return std::array<double, 3>{c.l, c.a, c.b};
    };
    const auto xp = L(x + 1, y), xm = L(x - 1, y), yp = L(x, y + 1), ym = L(x, y - 1);
    double g = 0.0;
    for (int c = 0; c < 3; ++c) {
      g += (xp[c] - xm[c]) * (xp[c] - xm[c]) + (yp[c] - ym[c]) * (yp[c] - ym[c]);
    }
    return g;
  };

  // Grid seeds over the mask's extent, kept where they land on the mask and
  // nudged to the lowest-gradient masked pixel of their 3x3 neighbourhood.
  std::vector<detail::Seed> seeds;
  const double bw = mx1 - mx0 + 1, bh = my1 - my0 + 1;
  const int xstrips = std::max(1, static_cast<int>(std::lround(bw / step)));
  const int ystrips = std::max(1, static_cast<int>(std::lround(bh / step)));
  const double xstep = bw / xstrips, ystep = bh / ystrips;
  for (int j = 0; j < ystrips; ++j) {
    for (int i = 0; i < xstrips; ++i) {
      const int sx = mx0 + static_cast<int>(std::floor((i + 0.5) * xstep));
      const int sy = my0 + static_cast<int>(std::floor((j + 0.5) * ystep));
      if (!masked(sx, sy)) continue;
      int bx = sx, by = sy;
      double bg = gradient(sx, sy);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (!masked(sx + dx, sy + dy)) continue;
          const double g = gradient(sx + dx, sy + dy);
          if (g < bg) {
            bg = g;
            bx = sx + dx;
            by = sy + dy;
          }
        }
      }
      const Lab& c = lab[static_cast<std::size_t>(by) * w + bx];
      seeds.push_back({c.l, c.a, c.b, static_cast<double>(bx), static_cast<double>(by)});
    }
  }
  if (seeds.empty()) {
    // Masked pixel nearest the mask centroid.
    double best = std::numeric_limits<double>::max();
    std::size_t bi = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!mask.data[i]) continue;
      const double dx = static_cast<double>(i % w) - cx, dy = static_cast<double>(i / w) - cy;
      if (dx * dx + dy * dy < best) {
        best = dx * dx + dy * dy;
        bi = i;
      }
    }
    const Lab& c = lab[bi];
    seeds.push_back({c.l, c.a, c.b, static_cast<double>(bi % w), static_cast<double>(bi / w)});
  }

  const std::size_t k = seeds.size();
  std::vector<int> labels(n, -1);
  std::vector<double> best_dist(n);
  std::vector<double> colour_dist(n);
  std::vector<double> max_lab(k, 100.0);
  const double inv_xy = 1.0 / (step * step);
  const int reach = static_cast<int>(std::ceil(step < 10.0 ? 1.5 * step : step));

  auto lab_dist = [&](const detail::Seed& s, std::size_t i) {
    const double dl = lab[i].l - s.l, da = lab[i].a - s.a, db = lab[i].b - s.b;
    return dl * dl + da * da + db * db;
  };

  for (int iter = 0; iter < iterations; ++iter) {
    std::fill(best_dist.begin(), best_dist.end(), std::numeric_limits<double>::max());
    std::fill(labels.begin(), labels.end(), -1);
    for (std::size_t s = 0; s < k; ++s) {
      const auto& seed = seeds[s];
      const int x0 = std::max(0, static_cast<int>(seed.x) - reach);
      const int x1 = std::min(w, static_cast<int>(seed.x) + reach + 1);
      const int y0 = std::max(0, static_cast<int>(seed.y) - reach);
      const int y1 = std::min(h, static_cast<int>(seed.y) + reach + 1);
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * w + x;
          if (!mask.data[i]) continue;
          const double dc = lab_dist(seed, i);
          const double dx = x - seed.x, dy = y - seed.y;
          const double d = dc / max_lab[s] + (dx * dx + dy * dy) * inv_xy;
          if (d < best_dist[i]) {
            best_dist[i] = d;
            labels[i] = static_cast<int>(s);
            colour_dist[i] = dc;
          }
        }
      }
    }
    // Masked pixels out of every seed's reach go to the spatially nearest seed.
    for (std::size_t i = 0; i < n; ++i) {
      if (!mask.data[i] || labels[i] >= 0) continue;
      const double x = static_cast<double>(i % w), y = static_cast<double>(i / w);
      double bd = std::numeric_limits<double>::max();
      for (std::size_t s = 0; s < k; ++s) {
        const double d = (x - seeds[s].x) * (x - seeds[s].x) + (y - seeds[s].y) * (y - seeds[s].y);
        if (d < bd) {
          bd = d;
          labels[i] = static_cast<int>(s);
        }
      }
      colour_dist[i] = lab_dist(seeds[static_cast<std::size_t>(labels[i])], i);
    }

    std::vector<detail::Seed> sums(k, detail::Seed{0, 0, 0, 0, 0});
    std::vector<std::size_t> sizes(k, 0);
    std::fill(max_lab.begin(), max_lab.end(), 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      const int s = labels[i];
      if (s < 0) continue;
      auto& acc = sums[static_cast<std::size_t>(s)];
      acc.l += lab[i].l;
      acc.a += lab[i].a;
      acc.b += lab[i].b;
      acc.x += static_cast<double>(i % w);
      acc.y += static_cast<double>(i / w);
      ++sizes[static_cast<std::size_t>(s)];
      max_lab[static_cast<std::size_t>(s)] = std::max(max_lab[static_cast<std::size_t>(s)], colour_dist[i]);
    }
    for (std::size_t s = 0; s < k; ++s) {
      if (sizes[s] == 0) continue;
      const double inv = 1.0 / static_cast<double>(sizes[s]);
      seeds[s] = {sums[s].l * inv, sums[s].a * inv, sums[s].b * inv, sums[s].x * inv, sums[s].y * inv};
    }
  }

  SuperpixelLabels out;
  out.region = region;
  out.count = detail::enforce_connectivity(labels, w, h);
  out.labels = std::move(labels);
  return out;
}

inline double patch_overlap(const Point2& a, const Point2& b, PatchSize size) noexcept {
  const double ox = std::max(0.0, size.w - std::abs(a.x - b.x));
  const double oy = std::max(0.0, size.h - std::abs(a.y - b.y));
  return ox * oy;
}

// Greedy placement at superpixel centroids, largest superpixel first. A
// centroid is accepted when its patch overlaps every accepted patch by less
// than gamma of one patch's area. Centroids are rounded to the nearest pixel
// and, when an image size is given, clamped half a patch inside it.
inline std::vector<Point2> place_patches(const SuperpixelLabels& labels, int max_patches,
                                         PatchSize size, double gamma, int image_w = 0,
                                         int image_h = 0) {
  if (labels.count < 1) throw std::domain_error("place_patches: no superpixels");
  const int w = labels.region.width();
  const std::size_t k = static_cast<std::size_t>(labels.count);
  std::vector<double> sx(k, 0.0), sy(k, 0.0);
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    const int l = labels.labels[i];
    if (l < 0) continue;
    sx[static_cast<std::size_t>(l)] += labels.region.x0 + static_cast<double>(i % w);
    sy[static_cast<std::size_t>(l)] += labels.region.y0 + static_cast<double>(i / w);
    ++sizes[static_cast<std::size_t>(l)];
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sizes[a] > sizes[b]; });

  const double limit = gamma * size.area();
  std::vector<Point2> accepted;
  for (std::size_t l : order) {
    if (static_cast<int>(accepted.size()) >= max_patches) break;
    if (sizes[l] == 0) continue;
    Point2 c{std::floor(sx[l] / static_cast<double>(sizes[l]) + 0.5),
             std::floor(sy[l] / static_cast<double>(sizes[l]) + 0.5)};
    if (image_w > 0 && image_h > 0) {
      c.x = std::clamp(c.x, std::floor(0.5 * size.w), std::max(0.0, image_w - 1 - std::floor(0.5 * size.w)));
      c.y = std::clamp(c.y, std::floor(0.5 * size.h), std::max(0.0, image_h - 1 - std::floor(0.5 * size.h)));
    }
    const bool ok = std::all_of(accepted.begin(), accepted.end(), [&](const Point2& a) {
      return patch_overlap(a, c, size) < limit;
    });
    if (ok) accepted.push_back(c);
  }
  return accepted;
}

// Ablation placement: a ceil(sqrt(P)) x ceil(sqrt(P)) grid of cell centres
// over the box, first P in row-major order.
inline std::vector<Point2> uniform_grid_centres(const Box& bbox, int max_patches) {
  const int n = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(max_patches))));
  std::vector<Point2> out;
  for (int j = 0; j < n && static_cast<int>(out.size()) < max_patches; ++j) {
    for (int i = 0; i < n && static_cast<int>(out.size()) < max_patches; ++i) {
      out.push_back({bbox.x + (i + 0.5) * bbox.w / n, bbox.y + (j + 0.5) * bbox.h / n});
    }
  }
  return out;
}

}  // namespace pbts
