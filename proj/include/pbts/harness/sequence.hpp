#pragma once

// Image sequences and their ground truth. Frames come from a source callback
// so synthetic sequences can run without touching disk.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pbts/geometry.hpp"
#include "pbts/image.hpp"

namespace pbts {

class SequenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a frame cannot be produced; carries the frame index.
class FrameError : public std::runtime_error {
 public:
  FrameError(std::size_t frame, const std::string& what) : std::runtime_error(what), frame_(frame) {}
  std::size_t frame() const noexcept { return frame_; }

 private:
  std::size_t frame_;
};

struct GroundTruth {
  Box box;  // what scoring uses
  std::optional<std::array<Point2, 4>> polygon;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

inline Box polygon_aabb(std::span<const Point2> pts) {
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
  double x1 = -x0, y1 = -x0;
  for (const auto& p : pts) {
    x0 = std::min(x0, p.x);
    y0 = std::min(y0, p.y);
    x1 = std::max(x1, p.x);
    y1 = std::max(y1, p.y);
  }
  return {x0, y0, x1 - x0, y1 - y0};
}

using FrameSource = std::function<Image(std::size_t)>;

struct Sequence {
  std::string name;
  std::vector<std::filesystem::path> frame_paths;  // empty for in-memory sequences
  std::vector<GroundTruth> truth;
  std::size_t frame_count = 0;
  FrameSource source;

  std::size_t size() const noexcept { return frame_count; }
  Image frame(std::size_t i) const {
    if (i >= frame_count) throw FrameError(i, "frame " + std::to_string(i) + " out of range");
    return source(i);
  }
};

// One line per frame: 4 values x,y,w,h or 8 values x1,y1,...,x4,y4.
// Blank lines are not allowed inside the data; trailing blank lines are.
inline std::vector<GroundTruth> parse_ground_truth(std::string_view text) {
  std::vector<GroundTruth> out;
  std::size_t line_no = 0, pos = 0, blank_run = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.remove_suffix(1);
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
    if (line.empty()) {
      ++blank_run;
      continue;
    }
    if (blank_run > 0)
      throw SequenceError("ground truth line " + std::to_string(line_no - blank_run) + ": empty line");
    const auto fail = [&](const std::string& why) {
      return SequenceError("ground truth line " + std::to_string(line_no) + ": " + why);
    };
    std::vector<double> v;
    std::size_t p = 0;
    while (true) {
      const auto comma = line.find(',', p);
      std::string_view tok = line.substr(p, comma == std::string_view::npos ? std::string_view::npos : comma - p);
      while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
      while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
      double value = 0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
      if (tok.empty() || ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(value))
        throw fail("cannot parse '" + std::string(tok) + "'");
      v.push_back(value);
      if (comma == std::string_view::npos) break;
      p = comma + 1;
    }
    GroundTruth g;
    if (v.size() == 4) {
      if (v[2] < 0 || v[3] < 0) throw fail("negative width or height");
      g.box = {v[0], v[1], v[2], v[3]};
    } else if (v.size() == 8) {
      g.polygon = std::array<Point2, 4>{{{v[0], v[1]}, {v[2], v[3]}, {v[4], v[5]}, {v[6], v[7]}}};
      g.box = polygon_aabb(*g.polygon);
    } else {
      throw fail("expected 4 or 8 values, got " + std::to_string(v.size()));
    }
    out.push_back(g);
  }
  return out;
}

inline std::string read_text_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw SequenceError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline bool is_frame_file(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".ppm";
}

// `path` is either a directory, whose image files are taken in lexicographic
// order, or a manifest listing one frame path per line relative to itself.
inline std::vector<std::filesystem::path> list_frames(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  std::vector<fs::path> frames;
  if (fs::is_directory(path)) {
    for (const auto& e : fs::directory_iterator(path)) {
      if (e.is_regular_file() && is_frame_file(e.path())) frames.push_back(e.path());
    }
    std::sort(frames.begin(), frames.end());
  } else if (fs::is_regular_file(path)) {
    std::istringstream in(read_text_file(path));
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line.front() == '#') continue;
      frames.push_back(path.parent_path() / line);
    }
  } else {
    throw SequenceError("no such sequence: " + path.string());
  }
  return frames;
}

using FrameLoader = std::function<Image(const std::filesystem::path&)>;

inline Sequence load_sequence(const std::filesystem::path& frames_at, const std::filesystem::path& truth_file,
                              FrameLoader loader) {
  Sequence seq;
  seq.frame_paths = list_frames(frames_at);
  seq.truth = parse_ground_truth(read_text_file(truth_file));
  if (seq.frame_paths.size() < 2) throw SequenceError("sequence needs at least 2 frames");
  if (seq.truth.size() != seq.frame_paths.size())
    throw SequenceError("ground truth has " + std::to_string(seq.truth.size()) + " lines for " +
                        std::to_string(seq.frame_paths.size()) + " frames");
  seq.name = std::filesystem::is_directory(frames_at) ? frames_at.filename().string()
                                                      : frames_at.stem().string();
  if (seq.name.empty()) seq.name = frames_at.parent_path().filename().string();
  seq.frame_count = seq.frame_paths.size();
  seq.source = [paths = seq.frame_paths, loader = std::move(loader)](std::size_t i) {
    try {
      Image img = loader(paths[i]);
      if (img.empty()) throw FrameError(i, "frame " + std::to_string(i) + ": empty image " + paths[i].string());
      return img;
    } catch (const FrameError&) {
      throw;
    } catch (const std::exception& e) {
      throw FrameError(i, "frame " + std::to_string(i) + ": " + e.what());
    }
  };
  return seq;
}

inline Sequence in_memory_sequence(std::string name, std::vector<Image> frames, std::vector<GroundTruth> truth) {
  if (frames.size() != truth.size()) throw SequenceError("frame and ground-truth counts differ");
  Sequence seq;
  seq.name = std::move(name);
  seq.truth = std::move(truth);
  seq.frame_count = frames.size();
  seq.source = [f = std::move(frames)](std::size_t i) { return f[i]; };
  return seq;
}

inline std::string format_ground_truth(const GroundTruth& g) {
  std::ostringstream os;
  os.precision(17);
  if (g.polygon) {
    const auto& p = *g.polygon;
    os << p[0].x << ',' << p[0].y << ',' << p[1].x << ',' << p[1].y << ',' << p[2].x << ',' << p[2].y << ','
       << p[3].x << ',' << p[3].y;
  } else {
    os << g.box.x << ',' << g.box.y << ',' << g.box.w << ',' << g.box.h;
  }
  return os.str();
}

}  // namespace pbts
