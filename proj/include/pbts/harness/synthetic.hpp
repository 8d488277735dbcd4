#pragma once

// Synthetic sequences with exact ground truth. A textured object (rectangle,
// ellipse or diamond) moves over a static background under per-frame
// translation, rotation and scale, with optional brightness ramp, moving
// occluder bar and per-frame sensor noise.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "pbts/config.hpp"
#include "pbts/geometry.hpp"
#include "pbts/harness/sequence.hpp"
#include "pbts/image.hpp"

namespace pbts::synth {

enum class Shape { kRect, kEllipse, kDiamond };
enum class Background { kNoise, kClutter };

struct Scenario {
  std::string name = "synthetic";
  int frames = 100;
  int width = 320;
  int height = 240;
  std::uint64_t seed = 1;
  Shape shape = Shape::kRect;
  Background background = Background::kClutter;
  double object_w = 64;
  double object_h = 48;
  double start_x = 100;  // object centre on frame 0
  double start_y = 120;
  double vx = 0;  // px / frame
  double vy = 0;
  double rotation = 0;  // rad / frame
  double scale = 0;     // relative size change / frame
  double illumination = 0;  // intensity added per frame
  double noise = 0;         // per-pixel Gaussian std
  int texture_cell = 8;     // object texture cell, object pixels
  int clutter_cell = 12;
  double occluder_w = 0;  // vertical bar width, 0 = none
  double occluder_x = 0;
  double occluder_speed = 0;
  int occluder_from = 0;
  int occluder_to = 0;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

// Object pose on frame t.
struct Pose {
  Point2 centre;
  double angle = 0;
  double scale = 1;
};

inline Pose pose_at(const Scenario& s, int t) {
  return {{s.start_x + s.vx * t, s.start_y + s.vy * t}, s.rotation * t, std::pow(1.0 + s.scale, t)};
}

inline std::array<Point2, 4> object_corners(const Scenario& s, int t) {
  const Pose p = pose_at(s, t);
  const double hw = 0.5 * s.object_w * p.scale, hh = 0.5 * s.object_h * p.scale;
  const double c = std::cos(p.angle), sn = std::sin(p.angle);
  std::array<Point2, 4> out;
  const std::array<Point2, 4> local{{{-hw, -hh}, {hw, -hh}, {hw, hh}, {-hw, hh}}};
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = {p.centre.x + c * local[i].x - sn * local[i].y, p.centre.y + sn * local[i].x + c * local[i].y};
  }
  return out;
}

inline GroundTruth ground_truth_at(const Scenario& s, int t) {
  GroundTruth g;
  if (s.rotation != 0.0) {
    g.polygon = object_corners(s, t);
    g.box = polygon_aabb(*g.polygon);
  } else {
    const Pose p = pose_at(s, t);
    const double w = s.object_w * p.scale, h = s.object_h * p.scale;
    g.box = {p.centre.x - 0.5 * w, p.centre.y - 0.5 * h, w, h};
  }
  return g;
}

namespace detail {

inline std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t cell_hash(std::uint64_t seed, std::int64_t i, std::int64_t j, std::uint64_t salt) {
  return mix(seed ^ mix(static_cast<std::uint64_t>(i) * 0x100000001B3ull ^ mix(static_cast<std::uint64_t>(j) + salt)));
}

// Warm hues for the object, cool hues for the background; every object colour
// is far more than the default match radius from every background colour.
inline std::array<double, 3> object_colour(std::uint64_t h) {
  return {170.0 + static_cast<double>(h % 86), 40.0 + static_cast<double>((h >> 8) % 150),
          static_cast<double>((h >> 16) % 50)};
}

inline std::array<double, 3> background_colour(std::uint64_t h) {
  return {static_cast<double>(h % 70), 50.0 + static_cast<double>((h >> 8) % 150),
          120.0 + static_cast<double>((h >> 16) % 136)};
}

inline bool inside_shape(Shape shape, double u, double v) {
  switch (shape) {
    case Shape::kRect:
      return std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
    case Shape::kEllipse:
      return u * u + v * v <= 1.0;
    case Shape::kDiamond:
      return std::abs(u) + std::abs(v) <= 1.0;
  }
  return false;
}

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace detail

// Renders frame t. When `object_mask` is given it receives 1 for every pixel
// whose centre lies on the object (before occlusion), row-major.
inline Image render_frame(const Scenario& s, int t, std::vector<std::uint8_t>* object_mask = nullptr) {
  Image img(s.width, s.height);
  if (object_mask) object_mask->assign(static_cast<std::size_t>(s.width) * s.height, 0);
  const Pose pose = pose_at(s, t);
  const double c = std::cos(pose.angle), sn = std::sin(pose.angle);
  const double light = s.illumination * t;
  std::mt19937_64 noise_rng(detail::mix(s.seed * 1000003ull + static_cast<std::uint64_t>(t)));
  std::normal_distribution<double> noise(0.0, s.noise > 0 ? s.noise : 1.0);
  const double occ_x = s.occluder_x + s.occluder_speed * t;
  const bool occluding = s.occluder_w > 0 && t >= s.occluder_from && t <= s.occluder_to;

  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      const double dx = x - pose.centre.x, dy = y - pose.centre.y;
      // Object-frame coordinates, unscaled pixels.
      const double ox = (c * dx + sn * dy) / pose.scale;
      const double oy = (-sn * dx + c * dy) / pose.scale;
      std::array<double, 3> col;
      const bool on_object = detail::inside_shape(s.shape, ox / (0.5 * s.object_w), oy / (0.5 * s.object_h));
      if (on_object) {
        const auto ci = static_cast<std::int64_t>(std::floor((ox + 0.5 * s.object_w) / s.texture_cell));
        const auto cj = static_cast<std::int64_t>(std::floor((oy + 0.5 * s.object_h) / s.texture_cell));
        col = detail::object_colour(detail::cell_hash(s.seed, ci, cj, 1));
        const double ramp = 20.0 * (ox / s.object_w);
        col[0] += ramp;
        col[1] += ramp;
        if (object_mask) (*object_mask)[static_cast<std::size_t>(y) * s.width + x] = 1;
      } else if (s.background == Background::kClutter) {
        const auto ci = static_cast<std::int64_t>(std::floor(static_cast<double>(x) / s.clutter_cell));
        const auto cj = static_cast<std::int64_t>(std::floor(static_cast<double>(y) / s.clutter_cell));
        col = detail::background_colour(detail::cell_hash(s.seed, ci, cj, 2));
      } else {
        col = detail::background_colour(detail::cell_hash(s.seed, x, y, 3));
      }
      if (occluding && x >= occ_x && x < occ_x + s.occluder_w) col = {128.0, 128.0, 128.0};
      for (auto& v : col) {
        v += light;
        if (s.noise > 0) v += noise(noise_rng);
      }
      img.at(x, y) = {detail::to_byte(col[0]), detail::to_byte(col[1]), detail::to_byte(col[2])};
    }
  }
  return img;
}

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void validate(const Scenario& s) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ScenarioError(std::string("invalid scenario: ") + what);
  };
  require(s.frames >= 2, "frames must be >= 2");
  require(s.width >= 8 && s.height >= 8, "image must be at least 8x8");
  require(s.object_w >= 4 && s.object_h >= 4, "object must be at least 4x4");
  require(s.scale > -1.0, "scale must be > -1");
  require(s.noise >= 0, "noise must be >= 0");
  require(s.texture_cell >= 1 && s.clutter_cell >= 1, "cell sizes must be >= 1");
  require(s.occluder_w >= 0, "occluder_w must be >= 0");
}

// `key = value` lines, `#` comments; same syntax as the tracker config.
inline Scenario parse_scenario(std::string_view text) {
  Scenario s;
  std::map<std::string, std::function<void(std::string_view)>> m;
  auto num = [&m](const char* key, auto& target) {
    m[key] = [&target, key](std::string_view v) {
      using T = std::remove_reference_t<decltype(target)>;
      T value{};
      auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
      bool ok = ec == std::errc{} && ptr == v.data() + v.size();
      if constexpr (std::is_floating_point_v<T>) ok = ok && std::isfinite(value);
      if (!ok) throw ScenarioError(std::string("bad value for ") + key + ": '" + std::string(v) + "'");
      target = value;
    };
  };
  m["name"] = [&s](std::string_view v) { s.name = std::string(v); };
  m["shape"] = [&s](std::string_view v) {
    if (v == "rect") s.shape = Shape::kRect;
    else if (v == "ellipse") s.shape = Shape::kEllipse;
    else if (v == "diamond") s.shape = Shape::kDiamond;
    else throw ScenarioError("bad shape '" + std::string(v) + "'");
  };
  m["background"] = [&s](std::string_view v) {
    if (v == "noise") s.background = Background::kNoise;
    else if (v == "clutter") s.background = Background::kClutter;
    else throw ScenarioError("bad background '" + std::string(v) + "'");
  };
  num("frames", s.frames);
  num("width", s.width);
  num("height", s.height);
  num("seed", s.seed);
  num("object_w", s.object_w);
  num("object_h", s.object_h);
  num("start_x", s.start_x);
  num("start_y", s.start_y);
  num("vx", s.vx);
  num("vy", s.vy);
  num("rotation", s.rotation);
  num("scale", s.scale);
  num("illumination", s.illumination);
  num("noise", s.noise);
  num("texture_cell", s.texture_cell);
  num("clutter_cell", s.clutter_cell);
  num("occluder_w", s.occluder_w);
  num("occluder_x", s.occluder_x);
  num("occluder_speed", s.occluder_speed);
  num("occluder_from", s.occluder_from);
  num("occluder_to", s.occluder_to);

  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = pbts::detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ScenarioError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key(pbts::detail::trim(line.substr(0, eq)));
    const auto it = m.find(key);
    if (it == m.end()) throw ScenarioError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    try {
      it->second(pbts::detail::trim(line.substr(eq + 1)));
    } catch (const ScenarioError& e) {
      throw ScenarioError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  validate(s);
  return s;
}

// In-memory sequence; frames render lazily on request.
inline Sequence make_sequence(const Scenario& s) {
  validate(s);
  Sequence seq;
  seq.name = s.name;
  seq.truth.reserve(static_cast<std::size_t>(s.frames));
  for (int t = 0; t < s.frames; ++t) seq.truth.push_back(ground_truth_at(s, t));
  seq.frame_count = static_cast<std::size_t>(s.frames);
  seq.source = [s](std::size_t t) { return render_frame(s, static_cast<int>(t)); };
  return seq;
}

}  // namespace pbts::synth
