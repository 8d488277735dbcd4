#include "pbts/placement.hpp"

#include <gtest/gtest.h>

#include <map>
#include <queue>
#include <random>
#include <vector>

namespace pbts {
namespace {

constexpr Rgb kRed{220, 30, 20};
constexpr Rgb kBlue{20, 40, 210};

Image two_tone(int w, int h, PixelRect object, Rgb fg, Rgb bg) {
  Image img(w, h, bg);
  for (int y = object.y0; y < object.y1; ++y)
    for (int x = object.x0; x < object.x1; ++x) img.at(x, y) = fg;
  return img;
}

TEST(Rasterise, PixelCentresInsideHalfOpenBox) {
  const auto r = rasterise({7.5, 7.5, 5, 5}, 100, 100);
  EXPECT_EQ(r.x0, 8);
  EXPECT_EQ(r.x1, 13);
  EXPECT_EQ(r.y0, 8);
  EXPECT_EQ(r.y1, 13);
  const auto i = rasterise({10, 20, 30, 40}, 100, 100);
  EXPECT_EQ(i.x0, 10);
  EXPECT_EQ(i.x1, 40);
  EXPECT_EQ(i.y1, 60);
  const auto c = rasterise({-5, -5, 20, 300}, 50, 50);
  EXPECT_EQ(c.x0, 0);
  EXPECT_EQ(c.y1, 50);
  EXPECT_TRUE(rasterise({60, 60, 5, 5}, 50, 50).empty());
}

TEST(Lab, MatchesReferenceConversion) {
  struct Case {
    Rgb in;
    double l, a, b;
  };
  const Case cases[] = {{{255, 0, 0}, 53.2406, 80.0923, 67.2028},
                        {{0, 255, 0}, 87.7351, -86.1830, 83.1797},
                        {{0, 0, 255}, 32.2957, 79.1856, -107.8573},
                        {{255, 255, 255}, 100.0, 0.0, 0.0},
                        {{128, 64, 32}, 34.7248, 24.9996, 31.3728}};
  for (const auto& c : cases) {
    const Lab v = rgb_to_lab(c.in);
    EXPECT_NEAR(v.l, c.l, 0.01);
    EXPECT_NEAR(v.a, c.a, 0.01);
    EXPECT_NEAR(v.b, c.b, 0.01);
  }
}

TEST(SegmentObject, UniformObjectUpToBoundaryBand) {
  // Object fills the shrunk box exactly: box centre 30, side 30 -> inner [18, 42).
  const PixelRect obj{18, 18, 42, 42};
  const Image img = two_tone(60, 60, obj, kRed, kBlue);
  Rng rng(1);
  const ObjectMask m = segment_object(img, {15, 15, 30, 30}, SegmenterConfig{}, rng);
  EXPECT_EQ(m.region.x0, 15);
  EXPECT_EQ(m.region.x1, 45);
  for (int y = m.region.y0; y < m.region.y1; ++y) {
    for (int x = m.region.x0; x < m.region.x1; ++x) {
      if (m.at(x, y)) {
        EXPECT_TRUE(obj.contains(x, y)) << x << "," << y;
      }
      if (x > obj.x0 && x < obj.x1 - 1 && y > obj.y0 && y < obj.y1 - 1) {
        EXPECT_TRUE(m.at(x, y)) << x << "," << y;
      }
    }
  }
}

TEST(SegmentObject, NoSmoothingGivesExactObject) {
  const PixelRect obj{18, 18, 42, 42};
  const Image img = two_tone(60, 60, obj, kRed, kBlue);
  SegmenterConfig cfg;
  cfg.lambda = 0.0;
  Rng rng(2);
  const ObjectMask m = segment_object(img, {15, 15, 30, 30}, cfg, rng);
  for (int y = m.region.y0; y < m.region.y1; ++y)
    for (int x = m.region.x0; x < m.region.x1; ++x) EXPECT_EQ(m.at(x, y), obj.contains(x, y));
}

TEST(SegmentObject, SmoothingPassCount) {
  // More smoothing passes erode the mask further in from the object edge.
  const PixelRect obj{18, 18, 42, 42};
  Image img = two_tone(60, 60, obj, kRed, kBlue);
  SegmenterConfig cfg;
  cfg.lambda = 0.0025;  // ceil(1 / 0.25) = 4 passes
  Rng rng(3);
  const ObjectMask four = segment_object(img, {15, 15, 30, 30}, cfg, rng);
  cfg.lambda = 0.01;
  Rng rng2(3);
  const ObjectMask one = segment_object(img, {15, 15, 30, 30}, cfg, rng2);
  EXPECT_LT(four.count(), one.count());
}

TEST(SegmentObject, IndistinguishableColoursFallBackToAllTrue) {
  const Image img(60, 60, kRed);
  Rng rng(4);
  const ObjectMask m = segment_object(img, {15, 15, 30, 30}, SegmenterConfig{}, rng);
  EXPECT_EQ(m.count(), 30u * 30u);
}

TEST(SegmentObject, DegenerateBoxIsAllTrue) {
  const Image img = two_tone(60, 60, {18, 18, 42, 42}, kRed, kBlue);
  Rng rng(5);
  const ObjectMask m = segment_object(img, {20, 20, 2, 30}, SegmenterConfig{}, rng);
  EXPECT_EQ(m.count(), m.data.size());
  EXPECT_EQ(m.width(), 2);
}

TEST(SegmentObject, DisjointBoxThrows) {
  const Image img(20, 20);
  Rng rng(6);
  EXPECT_THROW(segment_object(img, {40, 40, 10, 10}, SegmenterConfig{}, rng), std::domain_error);
}

TEST(SegmentObject, SameSeedSameMask) {
  std::mt19937 gen(9);
  Image img(80, 60);
  for (auto& p : img.pixels()) p = {static_cast<std::uint8_t>(gen()), static_cast<std::uint8_t>(gen()), 90};
  Rng a(17), b(17);
  EXPECT_EQ(segment_object(img, {20, 10, 40, 30}, {}, a).data, segment_object(img, {20, 10, 40, 30}, {}, b).data);
}

// Every masked pixel labelled, labels in range, each label one 4-connected piece.
void check_label_invariants(const ObjectMask& mask, const SuperpixelLabels& sp) {
  const int w = mask.width(), h = mask.height();
  ASSERT_EQ(sp.labels.size(), mask.data.size());
  std::vector<int> pixels(static_cast<std::size_t>(sp.count), 0);
  for (std::size_t i = 0; i < sp.labels.size(); ++i) {
    if (mask.data[i]) {
      ASSERT_GE(sp.labels[i], 0);
      ASSERT_LT(sp.labels[i], sp.count);
      ++pixels[static_cast<std::size_t>(sp.labels[i])];
    } else {
      ASSERT_EQ(sp.labels[i], -1);
    }
  }
  std::vector<int> seen(static_cast<std::size_t>(sp.count), 0);
  std::vector<char> visited(sp.labels.size(), 0);
  for (std::size_t i = 0; i < sp.labels.size(); ++i) {
    if (sp.labels[i] < 0 || visited[i]) continue;
    const int l = sp.labels[i];
    ASSERT_EQ(seen[static_cast<std::size_t>(l)], 0) << "label " << l << " is split";
    std::queue<std::size_t> q;
    q.push(i);
    visited[i] = 1;
    int n = 0;
    while (!q.empty()) {
      const auto c = q.front();
      q.pop();
      ++n;
      const int x = static_cast<int>(c % w), y = static_cast<int>(c / w);
      const int nb[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
      for (const auto& d : nb) {
        const int xx = x + d[0], yy = y + d[1];
        if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
        const auto j = static_cast<std::size_t>(yy) * w + xx;
        if (!visited[j] && sp.labels[j] == l) {
          visited[j] = 1;
          q.push(j);
        }
      }
    }
    seen[static_cast<std::size_t>(l)] = n;
  }
  for (int l = 0; l < sp.count; ++l) EXPECT_EQ(seen[static_cast<std::size_t>(l)], pixels[static_cast<std::size_t>(l)]);
}

TEST(Slico, UniformRegionSplitsEvenly) {
  const Image img(40, 40, kRed);
  const auto mask = ObjectMask::all_true({0, 0, 40, 40});
  const auto sp = slico_superpixels(img, mask, 4);
  ASSERT_EQ(sp.count, 4);
  check_label_invariants(mask, sp);
  std::map<int, int> area;
  for (int l : sp.labels) ++area[l];
  for (const auto& [l, n] : area) {
    EXPECT_GE(n, 0.75 * 400) << l;
    EXPECT_LE(n, 1.25 * 400) << l;
  }
}

TEST(Slico, SingleTargetCoversMask) {
  const Image img = two_tone(30, 30, {5, 5, 20, 20}, kRed, kBlue);
  const auto mask = ObjectMask::all_true({0, 0, 30, 30});
  const auto sp = slico_superpixels(img, mask, 1);
  EXPECT_EQ(sp.count, 1);
  for (int l : sp.labels) EXPECT_EQ(l, 0);
}

TEST(Slico, FollowsColourBoundary) {
  const Image img = two_tone(40, 20, {0, 0, 20, 20}, kRed, kBlue);
  const auto mask = ObjectMask::all_true({0, 0, 40, 20});
  const auto sp = slico_superpixels(img, mask, 2);
  ASSERT_EQ(sp.count, 2);
  check_label_invariants(mask, sp);
  // Each row switches label once, within 1 px of x = 20.
  for (int y = 0; y < 20; ++y) {
    for (int x = 0; x < 40; ++x) {
      if (x < 19) {
        EXPECT_EQ(sp.at(x, y), sp.at(0, y));
      }
      if (x > 20) {
        EXPECT_EQ(sp.at(x, y), sp.at(39, y));
      }
    }
    EXPECT_NE(sp.at(0, y), sp.at(39, y));
  }
}

TEST(Slico, InvariantsOnRandomMasksAndImages) {
  std::mt19937 gen(123);
  for (int trial = 0; trial < 40; ++trial) {
    const int w = 20 + static_cast<int>(gen() % 40), h = 20 + static_cast<int>(gen() % 40);
    Image img(w, h);
    const int cell = 2 + static_cast<int>(gen() % 6);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        std::mt19937 c(static_cast<unsigned>((x / cell) * 7919 + (y / cell) * 104729 + trial));
        img.at(x, y) = {static_cast<std::uint8_t>(c()), static_cast<std::uint8_t>(c()), static_cast<std::uint8_t>(c())};
      }
    ObjectMask mask = ObjectMask::all_true({3, 2, 3 + w - 6, 2 + h - 4});
    // Random blobs knocked out, sometimes leaving islands.
    for (int k = 0; k < 3; ++k) {
      const int bx = mask.region.x0 + static_cast<int>(gen() % mask.width());
      const int by = mask.region.y0 + static_cast<int>(gen() % mask.height());
      const int r = 2 + static_cast<int>(gen() % 6);
      for (int y = mask.region.y0; y < mask.region.y1; ++y)
        for (int x = mask.region.x0; x < mask.region.x1; ++x)
          if ((x - bx) * (x - bx) + (y - by) * (y - by) <= r * r) mask.set(x, y, false);
    }
    if (mask.count() == 0) continue;
    const int k = 1 + static_cast<int>(gen() % 40);
    const auto sp = slico_superpixels(img, mask, k);
    EXPECT_GE(sp.count, 1);
    check_label_invariants(mask, sp);
    EXPECT_EQ(sp.labels, slico_superpixels(img, mask, k).labels);
  }
}

TEST(Slico, RejectsBadInput) {
  const Image img(10, 10);
  ObjectMask empty{{0, 0, 10, 10}, std::vector<std::uint8_t>(100, 0)};
  EXPECT_THROW(slico_superpixels(img, empty, 3), std::domain_error);
  EXPECT_THROW(slico_superpixels(img, ObjectMask::all_true({0, 0, 10, 10}), 0), std::domain_error);
}

SuperpixelLabels labels_from(PixelRect region, const std::vector<std::vector<std::pair<int, int>>>& sets) {
  SuperpixelLabels sp;
  sp.region = region;
  sp.labels.assign(static_cast<std::size_t>(region.width()) * region.height(), -1);
  sp.count = static_cast<int>(sets.size());
  for (std::size_t l = 0; l < sets.size(); ++l)
    for (const auto& [x, y] : sets[l])
      sp.labels[static_cast<std::size_t>(y - region.y0) * region.width() + (x - region.x0)] = static_cast<int>(l);
  return sp;
}

TEST(PlacePatches, CloseCentroidRejected) {
  // Label 0 centroid (10, 10), label 1 centroid (11, 10): overlap 4 x 5 = 20 >= 0.25 x 25.
  const auto sp = labels_from({0, 0, 30, 30}, {{{9, 10}, {10, 10}, {11, 10}}, {{11, 9}, {11, 11}}});
  const auto c = place_patches(sp, 35, {5, 5}, 0.25);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0], (Point2{10, 10}));
  EXPECT_DOUBLE_EQ(patch_overlap({10, 10}, {11, 10}, {5, 5}), 20.0);
}

TEST(PlacePatches, FivePixelsApartBothAccepted) {
  const auto sp = labels_from({0, 0, 30, 30}, {{{10, 10}, {10, 11}}, {{15, 10}}});
  const auto c = place_patches(sp, 35, {5, 5}, 0.25);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0], (Point2{10, 11}));
  EXPECT_EQ(c[1], (Point2{15, 10}));
}

TEST(PlacePatches, StopsWhenSuperpixelsRunOut) {
  std::vector<std::vector<std::pair<int, int>>> sets;
  for (int i = 0; i < 10; ++i) sets.push_back({{5 + 10 * i, 5}, {5 + 10 * i, 6}});
  const auto sp = labels_from({0, 0, 110, 12}, sets);
  EXPECT_EQ(place_patches(sp, 35, {5, 5}, 0.25).size(), 10u);
  EXPECT_EQ(place_patches(sp, 4, {5, 5}, 0.25).size(), 4u);
}

TEST(PlacePatches, LargestFirstAndClampedInsideImage) {
  const auto sp = labels_from({0, 0, 40, 40}, {{{0, 0}}, {{20, 20}, {21, 20}, {20, 21}, {21, 21}, {22, 22}}});
  const auto c = place_patches(sp, 35, {5, 5}, 0.25, 40, 40);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0], (Point2{21, 21}));
  EXPECT_EQ(c[1], (Point2{2, 2}));
}

TEST(PlacePatches, RandomLabelMapsRespectOverlapBound) {
  std::mt19937 gen(31);
  for (int trial = 0; trial < 200; ++trial) {
    const int w = 20 + static_cast<int>(gen() % 50), h = 20 + static_cast<int>(gen() % 50);
    const int k = 1 + static_cast<int>(gen() % 60);
    SuperpixelLabels sp;
    sp.region = {0, 0, w, h};
    sp.count = k;
    sp.labels.resize(static_cast<std::size_t>(w) * h);
    for (auto& l : sp.labels) l = static_cast<int>(gen() % (k + 1)) - 1;
    for (int l = 0; l < k; ++l) sp.labels[static_cast<std::size_t>(l)] = l;  // every label present
    const double gamma = 0.05 + (gen() % 95) / 100.0;
    const PatchSize size{1 + static_cast<int>(gen() % 9), 1 + static_cast<int>(gen() % 9)};
    const auto c = place_patches(sp, 35, size, gamma);
    ASSERT_GE(c.size(), 1u);
    for (std::size_t i = 0; i < c.size(); ++i) {
      EXPECT_EQ(c[i].x, std::floor(c[i].x));
      for (std::size_t j = i + 1; j < c.size(); ++j) {
        // Exhaustive unit-cell intersection of the two rectangles.
        int shared = 0;
        for (int y = 0; y < size.h; ++y)
          for (int x = 0; x < size.w; ++x) {
            const double px = c[i].x + x, py = c[i].y + y;
            if (px >= c[j].x && px < c[j].x + size.w && py >= c[j].y && py < c[j].y + size.h) ++shared;
          }
        EXPECT_LT(shared, gamma * size.area());
      }
    }
  }
}

TEST(UniformGrid, CountAndPositions) {
  const auto c = uniform_grid_centres({10, 20, 60, 60}, 35);
  ASSERT_EQ(c.size(), 35u);
  EXPECT_EQ(c.front(), (Point2{15, 25}));
  for (const auto& p : c) {
    EXPECT_GT(p.x, 10);
    EXPECT_LT(p.x, 70);
    EXPECT_GT(p.y, 20);
    EXPECT_LT(p.y, 80);
  }
  EXPECT_EQ(uniform_grid_centres({0, 0, 10, 10}, 1).size(), 1u);
  EXPECT_EQ(uniform_grid_centres({0, 0, 10, 10}, 9).size(), 9u);
}

}  // namespace
}  // namespace pbts
