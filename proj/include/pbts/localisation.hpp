#pragma once

// Two-stage per-frame localisation. G random similarity transforms of the
// previous patch layout are scored by mean patch quality; the best L layouts
// then have every patch moved independently to the best offset in a W x W
// window. The best refined layout wins and is reported as its enclosing box
// grown by `expand`.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "pbts/colour_model.hpp"
#include "pbts/config.hpp"
#include "pbts/geometry.hpp"
#include "pbts/image.hpp"
#include "pbts/parallel.hpp"
#include "pbts/random.hpp"

namespace pbts {

struct CandidateSet {
  TransformParams transform;
  std::vector<Point2> patch_centres;
  std::vector<double> patch_qualities;
  double quality = 0.0;
};

struct LocaliseResult {
  std::vector<Point2> centres;
  std::vector<double> qualities;
  double quality = 0.0;
  Box box;
  TransformParams transform;
  // Diagnostics: every globally scored candidate (unrefined), the indices of
  // those kept for refinement in rank order, and their refined versions.
  std::vector<CandidateSet> global;
  std::vector<std::size_t> kept;
  std::vector<CandidateSet> refined;
  std::size_t chosen = 0;  // index into `refined`, or into `global` when nothing was refined
};

inline Point2 round_point(const Point2& p) noexcept {
  return {std::floor(p.x + 0.5), std::floor(p.y + 0.5)};
}

// In-bounds pixels of the w x h block at the rounded centre, row-major.
// Returns how many were written.
inline std::size_t extract_patch_pixels(const Image& frame, const Point2& centre, PatchSize size,
                                        std::vector<Rgb>& out) {
  out.clear();
  const Point2 c = round_point(centre);
  const int x0 = static_cast<int>(c.x) - size.w / 2;
  const int y0 = static_cast<int>(c.y) - size.h / 2;
  for (int y = y0; y < y0 + size.h; ++y) {
    if (y < 0 || y >= frame.height()) continue;
    for (int x = x0; x < x0 + size.w; ++x) {
      if (x < 0 || x >= frame.width()) continue;
      out.push_back(frame.at(x, y));
    }
  }
  return out.size();
}

inline std::vector<Rgb> extract_patch_pixels(const Image& frame, const Point2& centre, PatchSize size) {
  std::vector<Rgb> out;
  extract_patch_pixels(frame, centre, size, out);
  return out;
}

namespace detail {

// Read-only view of a patch model with its self histogram precomputed.
struct PreparedPatch {
  const PatchModel* model = nullptr;
  std::vector<double> self;

  explicit PreparedPatch(const PatchModel& m) : model(&m), self(self_histogram(m).counts) {}

  // Identical arithmetic to patch_quality().
  double quality_from_counts(std::span<const int> counts, double b) const {
    const double area = model->size.area();
    double bc = 0.0;
    for (std::size_t j = 0; j < self.size(); ++j) bc += std::sqrt(self[j] * (counts[j] / area));
    return 1.0 - mbd_from_bc(bc, b);
  }

  double quality_at(const Image& frame, const Point2& centre, double b, std::vector<Rgb>& px,
                    std::vector<int>& counts) const {
    extract_patch_pixels(frame, centre, model->size, px);
    count_matches(*model, px, counts);
    return quality_from_counts(counts, b);
  }
};

struct RefineOutcome {
  Point2 centre;
  double quality = 0.0;
};

// Exhaustive W x W search around `base` for one patch. Best quality wins;
// exact ties go to the offset nearest the window centre, then to `rng`.
inline RefineOutcome refine_patch(const Image& frame, const PreparedPatch& patch, const Point2& base,
                                  int window, double b, std::uint64_t tie_seed,
                                  std::uint64_t tie_a, std::uint64_t tie_b) {
  const PatchModel& m = *patch.model;
  const int half = window / 2;
  const Point2 rc = round_point(base);
  const int bx = static_cast<int>(rc.x), by = static_cast<int>(rc.y);
  // Label every pixel the window can touch once, then count per offset.
  const int gx0 = bx - half - m.size.w / 2;
  const int gy0 = by - half - m.size.h / 2;
  const int gw = window + m.size.w - 1;
  const int gh = window + m.size.h - 1;
  std::vector<int> labels(static_cast<std::size_t>(gw) * gh, -1);
  for (int y = 0; y < gh; ++y) {
    const int iy = gy0 + y;
    if (iy < 0 || iy >= frame.height()) continue;
    for (int x = 0; x < gw; ++x) {
      const int ix = gx0 + x;
      if (ix < 0 || ix >= frame.width()) continue;
      labels[static_cast<std::size_t>(y) * gw + x] = closest_centre(frame.at(ix, iy), m.pairs, m.radius);
    }
  }

  std::vector<int> counts(m.pairs.size());
  double best_q = -1.0;
  int best_d2 = 0;
  std::vector<std::pair<int, int>> tied;
  for (int oy = 0; oy < window; ++oy) {
    for (int ox = 0; ox < window; ++ox) {
      std::fill(counts.begin(), counts.end(), 0);
      for (int y = 0; y < m.size.h; ++y) {
        const int* row = labels.data() + static_cast<std::size_t>(oy + y) * gw + ox;
        for (int x = 0; x < m.size.w; ++x) {
          if (row[x] >= 0) ++counts[static_cast<std::size_t>(row[x])];
        }
      }
      const double q = patch.quality_from_counts(counts, b);
      const int dx = ox - half, dy = oy - half;
      const int d2 = dx * dx + dy * dy;
      if (q > best_q || (q == best_q && d2 < best_d2)) {
        best_q = q;
        best_d2 = d2;
        tied.assign(1, {dx, dy});
      } else if (q == best_q && d2 == best_d2) {
        tied.emplace_back(dx, dy);
      }
    }
  }
  std::pair<int, int> pick = tied.front();
  if (tied.size() > 1) {
    Rng rng = derive_rng(tie_seed, Stream::kTieBreak, tie_a, tie_b);
    pick = tied[uniform_index(rng, tied.size())];
  }
  return {{base.x + pick.first, base.y + pick.second}, best_q};
}

}  // namespace detail

// Per-frame inputs that stay fixed while candidates are evaluated.
struct LocaliseContext {
  std::uint64_t seed = 0;
  std::uint64_t frame_index = 0;
};

// Localises against an explicit list of candidate transforms. The random
// entry point below draws them; tests may pass hand-picked ones.
inline LocaliseResult localise_with_transforms(const Image& frame, std::span<const PatchModel> patches,
                                               std::span<const TransformParams> transforms,
                                               const TrackerConfig& cfg, const LocaliseContext& ctx) {
  if (patches.empty()) throw std::domain_error("localise: no patches");
  if (transforms.empty()) throw std::domain_error("localise: no candidate transforms");
  const double b = cfg.effective_exponent();
  const std::size_t n_patches = patches.size();

  std::vector<detail::PreparedPatch> prepared;
  prepared.reserve(n_patches);
  for (const auto& p : patches) prepared.emplace_back(p);
  std::vector<Point2> prev(n_patches);
  for (std::size_t i = 0; i < n_patches; ++i) prev[i] = patches[i].location;
  const Point2 anchor = centroid(prev);

  LocaliseResult res;
  res.global.resize(transforms.size());
  parallel_for(transforms.size(), cfg.workers, [&](std::size_t g) {
    std::vector<Rgb> px;
    std::vector<int> counts;
    CandidateSet& c = res.global[g];
    c.transform = transforms[g];
    c.patch_centres.resize(n_patches);
    c.patch_qualities.resize(n_patches);
    for (std::size_t p = 0; p < n_patches; ++p) {
      c.patch_centres[p] = apply_transform(transforms[g], anchor, prev[p]);
      c.patch_qualities[p] = prepared[p].quality_at(frame, c.patch_centres[p], b, px, counts);
    }
    c.quality = object_quality(c.patch_qualities);
  });

  // Rank by quality; equal qualities keep a random relative order.
  std::vector<std::size_t> order(transforms.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  {
    Rng rng = derive_rng(ctx.seed, Stream::kTieBreak, ctx.frame_index, ~std::uint64_t{0});
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) {
    return res.global[a].quality > res.global[c].quality;
  });

  const std::size_t n_keep = std::min<std::size_t>(static_cast<std::size_t>(cfg.effective_refined()), order.size());
  const CandidateSet* best = nullptr;
  if (n_keep == 0) {
    res.chosen = order.front();
    best = &res.global[res.chosen];
  } else {
    res.kept.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_keep));
    res.refined.resize(n_keep);
    parallel_for(n_keep, cfg.workers, [&](std::size_t k) {
      const CandidateSet& src = res.global[res.kept[k]];
      CandidateSet& dst = res.refined[k];
      dst.transform = src.transform;
      dst.patch_centres.resize(n_patches);
      dst.patch_qualities.resize(n_patches);
      for (std::size_t p = 0; p < n_patches; ++p) {
        const auto r = detail::refine_patch(frame, prepared[p], src.patch_centres[p], cfg.window, b,
                                            ctx.seed, ctx.frame_index, k * n_patches + p);
        dst.patch_centres[p] = r.centre;
        dst.patch_qualities[p] = r.quality;
      }
      dst.quality = object_quality(dst.patch_qualities);
    });
    // Highest quality wins. Exact ties go to the candidate whose patches moved
    // least in total, then to rank order.
    auto displacement = [&](const CandidateSet& c) {
      double d = 0.0;
      for (std::size_t p = 0; p < n_patches; ++p) {
        const double dx = c.patch_centres[p].x - prev[p].x, dy = c.patch_centres[p].y - prev[p].y;
        d += dx * dx + dy * dy;
      }
      return d;
    };
    res.chosen = 0;
    double chosen_d = displacement(res.refined[0]);
    for (std::size_t k = 1; k < n_keep; ++k) {
      const double q = res.refined[k].quality, qc = res.refined[res.chosen].quality;
      if (q < qc) continue;
      const double d = displacement(res.refined[k]);
      if (q > qc || d < chosen_d) {
        res.chosen = k;
        chosen_d = d;
      }
    }
    best = &res.refined[res.chosen];
  }

  res.centres = best->patch_centres;
  res.qualities = best->patch_qualities;
  res.quality = best->quality;
  res.transform = best->transform;
  res.box = expand_box(enclosing_aabb(res.centres, cfg.patch.w, cfg.patch.h), cfg.expand);
  return res;
}

inline std::vector<TransformParams> sample_transforms(const TrackerConfig& cfg, const Box& prev_box,
                                                      std::uint64_t seed, std::uint64_t frame_index) {
  Rng rng = derive_rng(seed, Stream::kTransform, frame_index);
  std::vector<TransformParams> out;
  out.reserve(static_cast<std::size_t>(cfg.num_transforms));
  for (int g = 0; g < cfg.num_transforms; ++g) out.push_back(sample_transform(cfg.priors, prev_box, rng));
  return out;
}

inline LocaliseResult localise(const Image& frame, std::span<const PatchModel> patches, const Box& prev_box,
                               const TrackerConfig& cfg, const LocaliseContext& ctx) {
  if (frame.empty()) throw std::domain_error("localise: empty frame");
  const auto transforms = sample_transforms(cfg, prev_box, ctx.seed, ctx.frame_index);
  return localise_with_transforms(frame, patches, transforms, cfg, ctx);
}

}  // namespace pbts
