#pragma once

// Result files: per-frame CSV, curve CSVs and a summary JSON. The per-frame
// CSV holds everything needed to recompute the summaries.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pbts/harness/protocol.hpp"
#include "pbts/harness/sequence.hpp"

namespace pbts {

class ExportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kFramesHeader =
    "frame,status,x,y,w,h,gt_x,gt_y,gt_w,gt_h,iou,centre_error,quality";

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ExportError("cannot write " + p.string());
  out << text;
  if (!out) throw ExportError("write failed: " + p.string());
}

inline double parse_field(const std::string& tok, std::size_t line_no) {
  if (tok == "nan") return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw SequenceError("frames.csv line " + std::to_string(line_no) + ": bad number '" + tok + "'");
  }
}

}  // namespace detail

inline std::string frames_csv(const std::vector<FrameRecord>& frames) {
  std::string out = std::string(kFramesHeader) + "\n";
  for (const auto& f : frames) {
    using detail::fmt17;
    out += std::to_string(f.frame) + ',' + to_string(f.status) + ',' + fmt17(f.predicted.x) + ',' +
           fmt17(f.predicted.y) + ',' + fmt17(f.predicted.w) + ',' + fmt17(f.predicted.h) + ',' +
           fmt17(f.truth.x) + ',' + fmt17(f.truth.y) + ',' + fmt17(f.truth.w) + ',' + fmt17(f.truth.h) + ',' +
           fmt17(f.iou) + ',' + fmt17(f.centre_error) + ',' + fmt17(f.quality) + '\n';
  }
  return out;
}

inline std::vector<FrameRecord> parse_frames_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw SequenceError("frames.csv: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kFramesHeader) throw SequenceError("frames.csv: unexpected header");
  std::vector<FrameRecord> frames;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> tok;
    std::stringstream ls(line);
    for (std::string t; std::getline(ls, t, ',');) tok.push_back(t);
    if (tok.size() != 13)
      throw SequenceError("frames.csv line " + std::to_string(line_no) + ": expected 13 fields");
    FrameRecord f;
    const double idx = detail::parse_field(tok[0], line_no);
    if (!(idx >= 0) || idx != std::floor(idx))
      throw SequenceError("frames.csv line " + std::to_string(line_no) + ": bad frame index");
    f.frame = static_cast<std::size_t>(idx);
    f.status = parse_status(tok[1]);
    f.predicted = {detail::parse_field(tok[2], line_no), detail::parse_field(tok[3], line_no),
                   detail::parse_field(tok[4], line_no), detail::parse_field(tok[5], line_no)};
    f.truth = {detail::parse_field(tok[6], line_no), detail::parse_field(tok[7], line_no),
               detail::parse_field(tok[8], line_no), detail::parse_field(tok[9], line_no)};
    f.iou = detail::parse_field(tok[10], line_no);
    f.centre_error = detail::parse_field(tok[11], line_no);
    f.quality = detail::parse_field(tok[12], line_no);
    frames.push_back(f);
  }
  return frames;
}

inline std::string success_csv(const CurveData& c) {
  std::string out = "threshold,success\n";
  for (std::size_t i = 0; i < c.success.size(); ++i)
    out += detail::fmt17(success_threshold(static_cast<int>(i))) + ',' + detail::fmt17(c.success[i]) + '\n';
  return out;
}

inline std::string precision_csv(const CurveData& c) {
  std::string out = "threshold_px,precision\n";
  for (std::size_t i = 0; i < c.precision.size(); ++i)
    out += std::to_string(i) + ',' + detail::fmt17(c.precision[i]) + '\n';
  return out;
}

inline nlohmann::ordered_json summary_json(const Summary& s) {
  nlohmann::ordered_json j;
  j["name"] = s.name;
  j["AO"] = s.ao;
  j["failures"] = s.failures;
  j["robustness"] = s.robustness;
  j["AUC"] = s.auc;
  j["precision20"] = s.precision20;
  j["fps"] = s.fps;
  j["frames"] = s.frames;
  j["tracked_frames"] = s.tracked;
  return j;
}

inline const char* to_string(Mode m) { return m == Mode::kSupervised ? "supervised" : "onepass"; }

// Writes frames.csv, success.csv, precision.csv and summary.json into `dir`.
inline Summary export_run(const RunResult& r, const std::filesystem::path& dir, std::uint64_t seed) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ExportError("cannot create " + dir.string() + ": " + ec.message());
  const Summary s = summarise(r);
  const CurveData curves = compute_curves(r.frames);
  detail::write_file(dir / "frames.csv", frames_csv(r.frames));
  detail::write_file(dir / "success.csv", success_csv(curves));
  detail::write_file(dir / "precision.csv", precision_csv(curves));
  auto j = summary_json(s);
  j["mode"] = to_string(r.mode);
  j["seed"] = seed;
  j["failure_frames"] = r.failures;
  j["init_frames"] = r.inits;
  detail::write_file(dir / "summary.json", j.dump(2) + "\n");
  return s;
}

// Every directory at or below `root` holding a frames.csv, sorted.
inline std::vector<std::filesystem::path> find_result_dirs(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::vector<fs::path> dirs;
  if (!fs::is_directory(root)) throw SequenceError("no such results directory: " + root.string());
  if (fs::exists(root / "frames.csv")) dirs.push_back(root);
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_directory() && fs::exists(e.path() / "frames.csv")) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

// fps is not recoverable from frames.csv; it is taken from a sibling
// summary.json when one exists.
inline Summary evaluate_result_dir(const std::filesystem::path& dir) {
  const auto frames = parse_frames_csv(read_text_file(dir / "frames.csv"));
  double fps = 0.0;
  if (std::filesystem::exists(dir / "summary.json")) {
    const auto j = nlohmann::json::parse(read_text_file(dir / "summary.json"), nullptr, false);
    if (!j.is_discarded() && j.contains("fps") && j["fps"].is_number()) fps = j["fps"].get<double>();
  }
  return summarise(dir.filename().string(), frames, fps);
}

}  // namespace pbts
