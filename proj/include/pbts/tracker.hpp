#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pbts/colour_model.hpp"
#include "pbts/config.hpp"
#include "pbts/geometry.hpp"
#include "pbts/image.hpp"
#include "pbts/localisation.hpp"
#include "pbts/parallel.hpp"
#include "pbts/placement.hpp"
#include "pbts/random.hpp"

namespace pbts {

class TrackerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// All randomness is derived from `seed` plus the frame index and a stage tag,
// so the state needs no generator object to be reproducible.
struct TrackerState {
  std::vector<PatchModel> patches;
  Box prev_box;
  std::uint64_t frame_index = 0;
  std::uint64_t seed = 0;

  std::vector<Point2> centres() const {
    std::vector<Point2> out;
    out.reserve(patches.size());
    for (const auto& p : patches) out.push_back(p.location);
    return out;
  }

  friend bool operator==(const TrackerState&, const TrackerState&) = default;
};

// Intermediate products of initialisation, kept for inspection and debug dumps.
struct InitTrace {
  std::optional<ObjectMask> mask;
  std::optional<SuperpixelLabels> superpixels;
  std::vector<Point2> centres;
};

inline Box clamp_box(const Box& b, int width, int height) {
  const double x0 = std::clamp(b.x, 0.0, static_cast<double>(width));
  const double y0 = std::clamp(b.y, 0.0, static_cast<double>(height));
  const double x1 = std::clamp(b.right(), 0.0, static_cast<double>(width));
  const double y1 = std::clamp(b.bottom(), 0.0, static_cast<double>(height));
  return {x0, y0, x1 - x0, y1 - y0};
}

inline std::vector<Point2> choose_patch_centres(const Image& frame, const Box& bbox, const TrackerConfig& cfg,
                                                std::uint64_t seed, InitTrace* trace = nullptr) {
  std::vector<Point2> centres;
  if (cfg.ablation.uniform_placement) {
    centres = uniform_grid_centres(bbox, cfg.num_patches);
  } else {
    ObjectMask mask = [&] {
      if (cfg.ablation.no_segmentation)
        return ObjectMask::all_true(rasterise(bbox, frame.width(), frame.height()));
      Rng rng = derive_rng(seed, Stream::kSegmentation);
      return segment_object(frame, bbox, cfg.seg, rng, cfg.radius);
    }();
    SuperpixelLabels labels = slico_superpixels(frame, mask, cfg.num_patches);
    centres = place_patches(labels, cfg.num_patches, cfg.patch, cfg.gamma, frame.width(), frame.height());
    if (trace) {
      trace->mask = std::move(mask);
      trace->superpixels = std::move(labels);
    }
  }
  if (centres.empty()) centres.push_back(round_point(bbox.centre()));
  if (trace) trace->centres = centres;
  return centres;
}

inline TrackerState init_tracker(const Image& frame, const Box& bbox, const TrackerConfig& cfg,
                                 std::uint64_t seed, InitTrace* trace = nullptr) {
  cfg.validate();
  if (frame.empty()) throw TrackerError("init: empty frame");
  const Box box = clamp_box(bbox, frame.width(), frame.height());
  if (!(box.w > 0.0) || !(box.h > 0.0) || rasterise(box, frame.width(), frame.height()).empty())
    throw TrackerError("init: bounding box does not intersect the frame");

  TrackerState state;
  state.seed = seed;
  state.prev_box = box;
  const auto centres = choose_patch_centres(frame, box, cfg, seed, trace);
  std::vector<Rgb> px;
  for (std::size_t i = 0; i < centres.size(); ++i) {
    if (extract_patch_pixels(frame, centres[i], cfg.patch, px) == 0) continue;
    Rng rng = derive_rng(seed, Stream::kModelInit, 0, i);
    PatchModel m = init_model(px, cfg.patch, cfg.radius, static_cast<std::size_t>(cfg.s_max), rng);
    m.location = centres[i];
    state.patches.push_back(std::move(m));
  }
  if (state.patches.empty()) throw TrackerError("init: no patch could be placed");
  return state;
}

struct StepResult {
  Box box;
  std::vector<double> qualities;
  double quality = 0.0;
};

inline StepResult step_tracker(const Image& frame, TrackerState& state, const TrackerConfig& cfg,
                               LocaliseResult* trace = nullptr) {
  if (state.patches.empty()) throw TrackerError("step: tracker not initialised");
  ++state.frame_index;
  const LocaliseContext ctx{state.seed, state.frame_index};
  LocaliseResult loc = localise(frame, state.patches, state.prev_box, cfg, ctx);

  const std::size_t n = state.patches.size();
  const bool update = !cfg.ablation.no_update;
  const double min_valid = cfg.update_min_valid * cfg.patch.area();
  parallel_for(n, cfg.workers, [&](std::size_t p) {
    PatchModel& model = state.patches[p];
    const Point2 centre = loc.centres[p];
    if (update) {
      const auto px = extract_patch_pixels(frame, centre, cfg.patch);
      if (static_cast<double>(px.size()) >= min_valid) {
        Rng rng = derive_rng(state.seed, Stream::kUpdate, state.frame_index, p);
        model = update_model(model, px, cfg.beta_c, cfg.beta_s, rng);
      }
    }
    model.location = centre;
  });

  state.prev_box = loc.box;
  StepResult out{loc.box, loc.qualities, loc.quality};
  if (trace) *trace = std::move(loc);
  return out;
}

// Snapshot wire format (little-endian):
//   "PBTS" u32 version
//   then sections: char[4] tag, u64 byte length, payload
//     CONF: i32 P, i32 patch_w, i32 patch_h, f64 R
//     STAT: u64 seed, u64 frame_index, f64 x4 prev_box
//     PTCH: u32 n; n x { f64 x, f64 y, i32 w, i32 h, f64 R, u32 S, S x f64[4] (r,g,b,count) }
class SnapshotError : public std::runtime_error {
 public:
  enum class Kind { kVersion, kConfigMismatch, kCorrupt };
  SnapshotError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::uint32_t kSnapshotVersion = 1;

namespace detail {

class ByteWriter {
 public:
  void u32(std::uint32_t v) { put(v); }
  void u64(std::uint64_t v) { put(v); }
  void i32(std::int32_t v) { put(static_cast<std::uint32_t>(v)); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void tag(const char (&t)[5]) { bytes_.insert(bytes_.end(), t, t + 4); }
  void raw(std::span<const std::uint8_t> b) { bytes_.insert(bytes_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  template <class T>
  void put(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> b) : b_(b) {}
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  std::int32_t i32() { return static_cast<std::int32_t>(get<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::string tag() {
    need(4);
    std::string t(reinterpret_cast<const char*>(b_.data() + pos_), 4);
    pos_ += 4;
    return t;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const noexcept { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw SnapshotError(SnapshotError::Kind::kCorrupt, "snapshot: truncated payload");
  }
  template <class T>
  T get() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(b_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

inline void write_section(ByteWriter& out, const char (&tag)[5], ByteWriter& body) {
  out.tag(tag);
  out.u64(body.bytes().size());
  out.raw(body.bytes());
}

}  // namespace detail

inline std::vector<std::uint8_t> snapshot(const TrackerState& state, const TrackerConfig& cfg) {
  detail::ByteWriter out;
  out.tag("PBTS");
  out.u32(kSnapshotVersion);

  detail::ByteWriter conf;
  conf.i32(cfg.num_patches);
  conf.i32(cfg.patch.w);
  conf.i32(cfg.patch.h);
  conf.f64(cfg.radius);
  detail::write_section(out, "CONF", conf);

  detail::ByteWriter stat;
  stat.u64(state.seed);
  stat.u64(state.frame_index);
  stat.f64(state.prev_box.x);
  stat.f64(state.prev_box.y);
  stat.f64(state.prev_box.w);
  stat.f64(state.prev_box.h);
  detail::write_section(out, "STAT", stat);

  detail::ByteWriter ptch;
  ptch.u32(static_cast<std::uint32_t>(state.patches.size()));
  for (const auto& p : state.patches) {
    ptch.f64(p.location.x);
    ptch.f64(p.location.y);
    ptch.i32(p.size.w);
    ptch.i32(p.size.h);
    ptch.f64(p.radius);
    ptch.u32(static_cast<std::uint32_t>(p.pairs.size()));
    for (const auto& pc : p.pairs) {
      ptch.f64(pc.centre.r);
      ptch.f64(pc.centre.g);
      ptch.f64(pc.centre.b);
      ptch.f64(pc.count);
    }
  }
  detail::write_section(out, "PTCH", ptch);
  return std::move(out.bytes());
}

inline TrackerState restore(std::span<const std::uint8_t> bytes, const TrackerConfig& cfg) {
  using Kind = SnapshotError::Kind;
  detail::ByteReader in(bytes);
  if (in.tag() != "PBTS") throw SnapshotError(Kind::kCorrupt, "snapshot: bad magic");
  if (const auto v = in.u32(); v != kSnapshotVersion)
    throw SnapshotError(Kind::kVersion, "snapshot: unsupported version " + std::to_string(v));

  TrackerState state;
  bool have_conf = false, have_stat = false, have_ptch = false;
  while (!in.done()) {
    const std::string tag = in.tag();
    const std::uint64_t len = in.u64();
    detail::ByteReader body(in.take(static_cast<std::size_t>(len)));
    if (tag == "CONF") {
      const auto p = body.i32();
      const auto w = body.i32();
      const auto h = body.i32();
      const double r = body.f64();
      if (p != cfg.num_patches || w != cfg.patch.w || h != cfg.patch.h || r != cfg.radius)
        throw SnapshotError(Kind::kConfigMismatch, "snapshot: taken under a different configuration");
      have_conf = true;
    } else if (tag == "STAT") {
      state.seed = body.u64();
      state.frame_index = body.u64();
      state.prev_box = {body.f64(), body.f64(), body.f64(), body.f64()};
      have_stat = true;
    } else if (tag == "PTCH") {
      const auto n = body.u32();
      if (n > static_cast<std::uint32_t>(cfg.num_patches))
        throw SnapshotError(Kind::kCorrupt, "snapshot: more patches than P");
      state.patches.resize(n);
      for (auto& p : state.patches) {
        p.location = {body.f64(), body.f64()};
        p.size = {body.i32(), body.i32()};
        p.radius = body.f64();
        const auto s = body.u32();
        if (s > bytes.size()) throw SnapshotError(Kind::kCorrupt, "snapshot: implausible pair count");
        p.pairs.resize(s);
        for (auto& pc : p.pairs) {
          pc.centre = {body.f64(), body.f64(), body.f64()};
          pc.count = body.f64();
        }
      }
      have_ptch = true;
    } else {
      throw SnapshotError(Kind::kCorrupt, "snapshot: unknown section '" + tag + "'");
    }
    if (!body.done()) throw SnapshotError(Kind::kCorrupt, "snapshot: section '" + tag + "' has trailing bytes");
  }
  if (!have_conf || !have_stat || !have_ptch)
    throw SnapshotError(Kind::kCorrupt, "snapshot: missing section");
  return state;
}

// Convenience owner of a configuration and a live state.
class Tracker {
 public:
  explicit Tracker(TrackerConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  void init(const Image& frame, const Box& bbox, std::uint64_t seed, InitTrace* trace = nullptr) {
    state_ = init_tracker(frame, bbox, cfg_, seed, trace);
  }
  StepResult step(const Image& frame, LocaliseResult* trace = nullptr) {
    return step_tracker(frame, state_, cfg_, trace);
  }

  const TrackerConfig& config() const noexcept { return cfg_; }
  const TrackerState& state() const noexcept { return state_; }
  TrackerState& state() noexcept { return state_; }

 private:
  TrackerConfig cfg_;
  TrackerState state_;
};

}  // namespace pbts
