#pragma once

// Supervised (re-initialise after failure) and one-pass evaluation, per-frame
// records and the summary metrics derived from them.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "pbts/config.hpp"
#include "pbts/geometry.hpp"
#include "pbts/harness/sequence.hpp"
#include "pbts/tracker.hpp"

namespace pbts {

// What the protocols drive. `frame` is the index within the sequence, which
// stub trackers use to script their answers.
class SequenceTracker {
 public:
  struct Output {
    Box box;
    double quality = std::numeric_limits<double>::quiet_NaN();
  };
  virtual ~SequenceTracker() = default;
  virtual void init(const Image& image, const Box& box, std::size_t frame) = 0;
  virtual Output update(const Image& image, std::size_t frame) = 0;
};

class PbtsSequenceTracker final : public SequenceTracker {
 public:
  PbtsSequenceTracker(TrackerConfig cfg, std::uint64_t seed) : tracker_(std::move(cfg)), seed_(seed) {}

  // Re-initialisations draw from a seed keyed on the frame so they do not
  // replay the randomness of the first initialisation.
  void init(const Image& image, const Box& box, std::size_t frame) override {
    const std::uint64_t s = frame == 0 ? seed_ : seed_ ^ (0x9E3779B97F4A7C15ull * (frame + 1));
    if (on_init) {
      InitTrace trace;
      tracker_.init(image, box, s, &trace);
      on_init(trace, image, frame);
    } else {
      tracker_.init(image, box, s);
    }
  }
  Output update(const Image& image, std::size_t) override {
    const auto r = tracker_.step(image);
    return {r.box, r.quality};
  }
  const Tracker& tracker() const noexcept { return tracker_; }

  // Receives segmentation and placement products of every (re)initialisation.
  std::function<void(const InitTrace&, const Image&, std::size_t)> on_init;

 private:
  Tracker tracker_;
  std::uint64_t seed_;
};

// Answers from a script of boxes, one per frame.
class ScriptedTracker final : public SequenceTracker {
 public:
  explicit ScriptedTracker(std::function<Box(std::size_t)> script) : script_(std::move(script)) {}
  void init(const Image&, const Box&, std::size_t frame) override { inits_.push_back(frame); }
  Output update(const Image&, std::size_t frame) override { return {script_(frame), 1.0}; }
  const std::vector<std::size_t>& inits() const noexcept { return inits_; }

 private:
  std::function<Box(std::size_t)> script_;
  std::vector<std::size_t> inits_;
};

enum class FrameStatus { kInit, kTracked, kFailure, kSkipped };

inline const char* to_string(FrameStatus s) {
  switch (s) {
    case FrameStatus::kInit: return "init";
    case FrameStatus::kTracked: return "tracked";
    case FrameStatus::kFailure: return "failure";
    case FrameStatus::kSkipped: return "skipped";
  }
  return "?";
}

inline FrameStatus parse_status(std::string_view s) {
  if (s == "init") return FrameStatus::kInit;
  if (s == "tracked") return FrameStatus::kTracked;
  if (s == "failure") return FrameStatus::kFailure;
  if (s == "skipped") return FrameStatus::kSkipped;
  throw SequenceError("unknown frame status '" + std::string(s) + "'");
}

// Values that do not apply to a frame (skipped frames, quality at init) are NaN.
struct FrameRecord {
  std::size_t frame = 0;
  FrameStatus status = FrameStatus::kTracked;
  Box predicted;
  Box truth;
  double iou = std::numeric_limits<double>::quiet_NaN();
  double centre_error = std::numeric_limits<double>::quiet_NaN();
  double quality = std::numeric_limits<double>::quiet_NaN();
};

enum class Mode { kSupervised, kOnePass };

struct RunResult {
  std::string name;
  Mode mode = Mode::kSupervised;
  std::vector<FrameRecord> frames;
  std::vector<std::size_t> failures;
  std::vector<std::size_t> inits;
  double track_seconds = 0.0;  // time spent inside update calls only
  std::size_t updates = 0;

  double fps() const noexcept { return track_seconds > 0 ? updates / track_seconds : 0.0; }
};

inline constexpr int kSuccessSteps = 20;   // IoU thresholds i/20, i = 0..20
inline constexpr int kPrecisionMax = 50;   // centre-error thresholds 0..50 px

inline double success_threshold(int i) { return i / static_cast<double>(kSuccessSteps); }

struct CurveData {
  std::vector<double> success;    // fraction of frames with IoU >= threshold
  std::vector<double> precision;  // fraction of frames with centre error <= threshold

  double auc() const {
    double s = 0.0;
    for (double v : success) s += v;
    return success.empty() ? 0.0 : s / static_cast<double>(success.size());
  }
  double precision_at(int px) const { return precision.at(static_cast<std::size_t>(px)); }
};

// Frames the tracker actually predicted, i.e. not init or skipped.
inline bool is_predicted(FrameStatus s) { return s == FrameStatus::kTracked || s == FrameStatus::kFailure; }

inline CurveData compute_curves(const std::vector<FrameRecord>& frames) {
  CurveData c;
  c.success.assign(kSuccessSteps + 1, 0.0);
  c.precision.assign(kPrecisionMax + 1, 0.0);
  std::size_t n = 0;
  for (const auto& f : frames) {
    if (!is_predicted(f.status)) continue;
    ++n;
    for (int i = 0; i <= kSuccessSteps; ++i)
      if (f.iou >= success_threshold(i)) c.success[static_cast<std::size_t>(i)] += 1.0;
    for (int t = 0; t <= kPrecisionMax; ++t)
      if (f.centre_error <= t) c.precision[static_cast<std::size_t>(t)] += 1.0;
  }
  if (n > 0) {
    for (auto& v : c.success) v /= static_cast<double>(n);
    for (auto& v : c.precision) v /= static_cast<double>(n);
  }
  return c;
}

struct Summary {
  std::string name;
  double ao = 0.0;  // mean IoU over tracked (non-failure) frames
  std::size_t failures = 0;
  double robustness = 0.0;  // failures per video
  double auc = 0.0;
  double precision20 = 0.0;
  double fps = 0.0;
  std::size_t frames = 0;
  std::size_t tracked = 0;
};

inline Summary summarise(const std::string& name, const std::vector<FrameRecord>& frames, double fps) {
  Summary s;
  s.name = name;
  s.frames = frames.size();
  double sum = 0.0;
  for (const auto& f : frames) {
    if (f.status == FrameStatus::kTracked) {
      sum += f.iou;
      ++s.tracked;
    } else if (f.status == FrameStatus::kFailure) {
      ++s.failures;
    }
  }
  s.ao = s.tracked > 0 ? sum / static_cast<double>(s.tracked) : 0.0;
  s.robustness = static_cast<double>(s.failures);
  const auto curves = compute_curves(frames);
  s.auc = curves.auc();
  s.precision20 = curves.precision_at(20);
  s.fps = fps;
  return s;
}

inline Summary summarise(const RunResult& r) { return summarise(r.name, r.frames, r.fps()); }

// Per-video scores averaged over videos; `failures` stays a total.
inline Summary average(const std::vector<Summary>& runs) {
  Summary m;
  m.name = "mean";
  if (runs.empty()) return m;
  const double n = static_cast<double>(runs.size());
  for (const auto& r : runs) {
    m.ao += r.ao / n;
    m.failures += r.failures;
    m.robustness += r.robustness / n;
    m.auc += r.auc / n;
    m.precision20 += r.precision20 / n;
    m.fps += r.fps / n;
    m.frames += r.frames;
    m.tracked += r.tracked;
  }
  return m;
}

struct ProtocolOptions {
  Mode mode = Mode::kSupervised;
  int reinit_skip = 5;
  // Called after every frame with the record just produced and the image.
  std::function<void(const FrameRecord&, const Image&)> on_frame;
};

inline RunResult run_sequence(const Sequence& seq, SequenceTracker& tracker, const ProtocolOptions& opt) {
  using clock = std::chrono::steady_clock;
  if (seq.size() < 2) throw SequenceError("sequence needs at least 2 frames");
  if (seq.truth.size() != seq.size()) throw SequenceError("ground truth and frame counts differ");
  if (opt.reinit_skip < 1) throw ConfigError("reinit_skip must be >= 1");

  RunResult res;
  res.name = seq.name;
  res.mode = opt.mode;
  res.frames.reserve(seq.size());
  std::size_t next_init = 0;
  bool live = false;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    FrameRecord rec;
    rec.frame = t;
    rec.truth = seq.truth[t].box;
    if (!live && t < next_init) {
      rec.status = FrameStatus::kSkipped;
      res.frames.push_back(rec);
      if (opt.on_frame) opt.on_frame(rec, Image{});
      continue;
    }
    const Image img = seq.frame(t);
    if (!live) {
      tracker.init(img, rec.truth, t);
      live = true;
      res.inits.push_back(t);
      rec.status = FrameStatus::kInit;
      rec.predicted = rec.truth;
      rec.iou = 1.0;
      rec.centre_error = 0.0;
    } else {
      const auto a = clock::now();
      const auto out = tracker.update(img, t);
      res.track_seconds += std::chrono::duration<double>(clock::now() - a).count();
      ++res.updates;
      rec.predicted = out.box;
      rec.quality = out.quality;
      rec.iou = iou(out.box, rec.truth);
      rec.centre_error = centre_error(out.box, rec.truth);
      rec.status = FrameStatus::kTracked;
      if (opt.mode == Mode::kSupervised && rec.iou <= 0.0) {
        rec.status = FrameStatus::kFailure;
        res.failures.push_back(t);
        live = false;
        next_init = t + static_cast<std::size_t>(opt.reinit_skip);
      }
    }
    res.frames.push_back(rec);
    if (opt.on_frame) opt.on_frame(rec, img);
  }
  return res;
}

inline RunResult run_supervised(const Sequence& seq, SequenceTracker& tracker, int reinit_skip = 5) {
  return run_sequence(seq, tracker, {Mode::kSupervised, reinit_skip, {}});
}

inline RunResult run_one_pass(const Sequence& seq, SequenceTracker& tracker) {
  return run_sequence(seq, tracker, {Mode::kOnePass, 5, {}});
}

inline RunResult run_supervised(const Sequence& seq, const Settings& settings, std::uint64_t seed) {
  PbtsSequenceTracker t(settings.tracker, seed);
  return run_supervised(seq, t, settings.protocol.reinit_skip);
}

inline RunResult run_one_pass(const Sequence& seq, const Settings& settings, std::uint64_t seed) {
  PbtsSequenceTracker t(settings.tracker, seed);
  return run_one_pass(seq, t);
}

}  // namespace pbts
