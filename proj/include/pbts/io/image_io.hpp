#pragma once

// Image files through OpenCV codecs, plus drawing helpers for annotated
// frames and debug dumps. Everything else in the library is OpenCV-free.

#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "pbts/geometry.hpp"
#include "pbts/harness/sequence.hpp"
#include "pbts/harness/synthetic.hpp"
#include "pbts/image.hpp"
#include "pbts/placement.hpp"

namespace pbts::io {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Image from_mat(const cv::Mat& bgr) {
  Image img(bgr.cols, bgr.rows);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) img.at(x, y) = {row[x][2], row[x][1], row[x][0]};
  }
  return img;
}

inline cv::Mat to_mat(const Image& img) {
  cv::Mat m(img.height(), img.width(), CV_8UC3);
  for (int y = 0; y < img.height(); ++y) {
    auto* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width(); ++x) {
      const Rgb& p = img.at(x, y);
      row[x] = {p.b, p.g, p.r};
    }
  }
  return m;
}

// Grey and alpha inputs are converted to 8-bit RGB.
inline Image read_image(const std::filesystem::path& p) {
  const cv::Mat m = cv::imread(p.string(), cv::IMREAD_COLOR);
  if (m.empty()) throw ImageIoError("cannot decode " + p.string());
  return from_mat(m);
}

inline void write_image(const std::filesystem::path& p, const Image& img) {
  if (!cv::imwrite(p.string(), to_mat(img))) throw ImageIoError("cannot write " + p.string());
}

inline void draw_box(cv::Mat& m, const Box& b, const cv::Scalar& bgr) {
  cv::rectangle(m, cv::Point2d(b.x, b.y), cv::Point2d(b.right(), b.bottom()), bgr, 1, cv::LINE_8);
}

// Predicted box in green, ground truth in red (as a polygon when it has one).
inline Image annotate(const Image& frame, const Box& predicted, const GroundTruth* truth, bool draw_predicted) {
  cv::Mat m = to_mat(frame);
  if (truth) {
    if (truth->polygon) {
      std::vector<cv::Point> pts;
      for (const auto& p : *truth->polygon) pts.emplace_back(static_cast<int>(std::lround(p.x)), static_cast<int>(std::lround(p.y)));
      cv::polylines(m, pts, true, cv::Scalar(0, 0, 255), 1);
    } else {
      draw_box(m, truth->box, cv::Scalar(0, 0, 255));
    }
  }
  if (draw_predicted) draw_box(m, predicted, cv::Scalar(0, 255, 0));
  return from_mat(m);
}

inline Rgb palette_colour(int label) {
  if (label < 0) return {0, 0, 0};
  std::uint64_t h = synth::detail::mix(static_cast<std::uint64_t>(label) + 1);
  return {static_cast<std::uint8_t>(64 + h % 192), static_cast<std::uint8_t>(64 + (h >> 8) % 192),
          static_cast<std::uint8_t>(64 + (h >> 16) % 192)};
}

// Full-frame images: outside the region is black.
inline Image mask_image(const ObjectMask& mask, int width, int height) {
  Image img(width, height);
  for (int y = std::max(0, mask.region.y0); y < std::min(height, mask.region.y1); ++y)
    for (int x = std::max(0, mask.region.x0); x < std::min(width, mask.region.x1); ++x)
      if (mask.at(x, y)) img.at(x, y) = {255, 255, 255};
  return img;
}

inline Image label_image(const SuperpixelLabels& labels, int width, int height) {
  Image img(width, height);
  for (int y = std::max(0, labels.region.y0); y < std::min(height, labels.region.y1); ++y)
    for (int x = std::max(0, labels.region.x0); x < std::min(width, labels.region.x1); ++x)
      img.at(x, y) = palette_colour(labels.at(x, y));
  return img;
}

inline std::string frame_file_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu.png", i + 1);
  return buf;
}

// Renders every frame to `dir` plus groundtruth.txt.
inline void write_synthetic(const synth::Scenario& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::string gt;
  for (int t = 0; t < s.frames; ++t) {
    write_image(dir / frame_file_name(static_cast<std::size_t>(t)), synth::render_frame(s, t));
    gt += format_ground_truth(synth::ground_truth_at(s, t)) + "\n";
  }
  std::FILE* f = std::fopen((dir / "groundtruth.txt").string().c_str(), "wb");
  if (!f) throw ImageIoError("cannot write " + (dir / "groundtruth.txt").string());
  const bool ok = std::fwrite(gt.data(), 1, gt.size(), f) == gt.size();
  std::fclose(f);
  if (!ok) throw ImageIoError("write failed: " + (dir / "groundtruth.txt").string());
}

}  // namespace pbts::io
