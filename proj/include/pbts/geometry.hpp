#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>

#include "pbts/image.hpp"
#include "pbts/random.hpp"

namespace pbts {

// Rotation + isotropic scale about an anchor, then translation by (tx, ty).
// The anchor itself is supplied at application time, so identity params
// are {0, 1, 0, 0} regardless of where the object is.
struct TransformParams {
  double r = 0.0;
  double s = 1.0;
  double tx = 0.0;
  double ty = 0.0;

  static constexpr TransformParams identity() noexcept { return {}; }
  friend bool operator==(const TransformParams&, const TransformParams&) = default;
};

struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const noexcept { return w * h; }
  Point2 centre() const noexcept { return {x + 0.5 * w, y + 0.5 * h}; }
  double right() const noexcept { return x + w; }
  double bottom() const noexcept { return y + h; }

  friend bool operator==(const Box&, const Box&) = default;
};

struct MotionPriors {
  double sigma_r = std::numbers::pi / 16.0;
  double sigma_s = 0.02;
  double sigma_x = 0.15;
  double sigma_y = 0.1;

  friend bool operator==(const MotionPriors&, const MotionPriors&) = default;
};

// Draws one candidate motion. The translation is a Laplace-distributed
// displacement of the anchor whose scale follows the previous box size.
inline TransformParams sample_transform(const MotionPriors& priors, const Box& prev_box,
                                        Rng& rng) {
  if (!(prev_box.w > 0.0) || !(prev_box.h > 0.0))
    throw std::domain_error("sample_transform: previous box must have positive size");
  std::normal_distribution<double> rot(0.0, priors.sigma_r);
  std::normal_distribution<double> scale(1.0, priors.sigma_s);
  TransformParams t;
  t.r = rot(rng);
  do {
    t.s = scale(rng);
  } while (!(t.s > 0.0));
  t.tx = sample_laplace(rng, prev_box.w * priors.sigma_x);
  t.ty = sample_laplace(rng, prev_box.h * priors.sigma_y);
  return t;
}

inline Point2 apply_transform(const TransformParams& t, const Point2& anchor,
                              const Point2& p) noexcept {
  const double dx = p.x - anchor.x;
  const double dy = p.y - anchor.y;
  const double c = std::cos(t.r);
  const double sn = std::sin(t.r);
  return {anchor.x + t.tx + t.s * (c * dx - sn * dy),
          anchor.y + t.ty + t.s * (sn * dx + c * dy)};
}

inline Point2 centroid(std::span<const Point2> points) {
  if (points.empty()) throw std::domain_error("centroid: no points");
  Point2 c;
  for (const auto& p : points) {
    c.x += p.x;
    c.y += p.y;
  }
  const double n = static_cast<double>(points.size());
  return {c.x / n, c.y / n};
}

inline Box enclosing_aabb(std::span<const Point2> centres, double patch_w, double patch_h) {
  if (centres.empty()) throw std::domain_error("enclosing_aabb: no patches");
  double x0 = centres[0].x, x1 = centres[0].x, y0 = centres[0].y, y1 = centres[0].y;
  for (const auto& c : centres) {
    x0 = std::min(x0, c.x);
    x1 = std::max(x1, c.x);
    y0 = std::min(y0, c.y);
    y1 = std::max(y1, c.y);
  }
  return {x0 - 0.5 * patch_w, y0 - 0.5 * patch_h, x1 - x0 + patch_w, y1 - y0 + patch_h};
}

inline Box expand_box(const Box& b, double factor) {
  if (factor < 0.0) throw std::domain_error("expand_box: negative factor");
  const double w = b.w * (1.0 + factor);
  const double h = b.h * (1.0 + factor);
  return {b.x - 0.5 * (w - b.w), b.y - 0.5 * (h - b.h), w, h};
}

inline double intersection_area(const Box& a, const Box& b) noexcept {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

inline double iou(const Box& a, const Box& b) noexcept {
  // Areas from the same edge differences as the intersection, so a box
  // against itself gives exactly 1.
  auto extent = [](const Box& r) { return (r.right() - r.x) * (r.bottom() - r.y); };
  const double inter = intersection_area(a, b);
  const double uni = extent(a) + extent(b) - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

inline double centre_error(const Box& a, const Box& b) noexcept {
  const Point2 ca = a.centre();
  const Point2 cb = b.centre();
  return std::hypot(ca.x - cb.x, ca.y - cb.y);
}

}  // namespace pbts
