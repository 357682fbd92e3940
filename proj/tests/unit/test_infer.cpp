#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <set>

#include "cn3d/error.hpp"
#include "cn3d/infer.hpp"
#include "cn3d/nn.hpp"
#include "cn3d/targets.hpp"
#include "oracles.hpp"

using namespace cn3d;

namespace {

GridConfig toy_grid() {
  GridConfig g;
  g.x_min = 0.0;
  g.x_max = 25.6;
  g.y_min = -12.8;
  g.y_max = 12.8;
  g.vx = g.vy = 0.2;
  return g;
}

void expect_same_box(const Box3D& a, const Box3D& b, double tol) {
  EXPECT_NEAR(a.cx, b.cx, tol);
  EXPECT_NEAR(a.cy, b.cy, tol);
  EXPECT_NEAR(a.cz, b.cz, tol);
  EXPECT_NEAR(a.l, b.l, tol);
  EXPECT_NEAR(a.w, b.w, tol);
  EXPECT_NEAR(a.h, b.h, tol);
  EXPECT_NEAR(std::remainder(a.yaw - b.yaw, 2 * kPi), 0.0, tol);
}

// KSWarp by hand: five explicit samples through the brute-force kernel sum.
double brute_kswarp(const Grid2D& center, const Grid2D& corner, const Box3D& box, int cls,
                    const GridConfig& g) {
  const auto ch = static_cast<std::size_t>(cls);
  const double row = (box.cx - g.x_min) / (g.vx * g.downsample);
  const double col = (box.cy - g.y_min) / (g.vy * g.downsample);
  double sum = oracle::brute_bilinear(center, col, row, ch);
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  for (double sl : {1.0, -1.0}) {
    for (double sw : {1.0, -1.0}) {
      const double x = box.cx + c * sl * box.l / 2 - s * sw * box.w / 2;
      const double y = box.cy + s * sl * box.l / 2 + c * sw * box.w / 2;
      sum += oracle::brute_bilinear(corner, (y - g.y_min) / (g.vy * g.downsample),
                                    (x - g.x_min) / (g.vx * g.downsample), ch);
    }
  }
  return std::clamp(sum / 5.0, 0.0, 1.0);
}

}  // namespace

TEST(Assemble, Examples) {
  GridConfig g;  // x from 0, vx 0.05, stride 4
  HeadMaps maps = HeadMaps::zeros(g.feature_rows(), g.feature_cols(), 1);
  maps.offset.at(10, 3, 0) = 0.3;
  maps.size.at(10, 3, 0) = 4;
  maps.size.at(10, 3, 1) = 2;
  maps.size.at(10, 3, 2) = 1.5;
  maps.direction.at(10, 3, 0) = 0.0;
  maps.direction.at(10, 3, 1) = 1.0;
  const std::vector<Peak> peaks{{10, 3, 0}, {11, 3, 0}};
  const auto res = assemble_boxes(peaks, maps, g);
  ASSERT_EQ(res.boxes.size(), 1u);
  EXPECT_EQ(res.dropped, 1u);
  EXPECT_NEAR(res.boxes[0].box.cx, 2.06, 1e-12);
  EXPECT_NEAR(res.boxes[0].box.cy, -40.0 + 3 * 0.2, 1e-12);
  EXPECT_NEAR(res.boxes[0].box.yaw, kPi / 2, 1e-12);
  EXPECT_THROW(assemble_boxes(std::vector<Peak>{{9999, 0, 0}}, maps, g), InvalidArgument);
}

TEST(Kswarp, Examples) {
  const GridConfig g = toy_grid();
  const std::size_t R = g.feature_rows(), C = g.feature_cols();
  Grid2D ones(R, C, 1, 1.0);
  // Center exactly on cell (5, 6).
  const Box3D box = make_box(5 * 0.8, -12.8 + 6 * 0.8, -1, 3.0, 1.6, 1.5, 0.4);
  const std::vector<ClassifiedBox> boxes{{box, 0, {}}};
  EXPECT_NEAR(kswarp(ones, ones, boxes, g)[0], 1.0, 1e-12);

  Grid2D spike(R, C, 1);
  spike.at(5, 6) = 1.0;
  EXPECT_NEAR(kswarp(spike, Grid2D(R, C, 1), boxes, g)[0], 0.2, 1e-12);
  EXPECT_NEAR(kswarp(spike, Grid2D(R, C, 1), boxes, g, false)[0], 1.0, 1e-12);
  EXPECT_EQ(kswarp(Grid2D(R, C, 1), Grid2D(R, C, 1), boxes, g)[0], 0.0);
  EXPECT_THROW(kswarp(ones, Grid2D(R, C, 2), boxes, g), InvalidArgument);
  const std::vector<ClassifiedBox> bad{{box, 1, {}}};
  EXPECT_THROW(kswarp(ones, ones, bad, g), InvalidArgument);
}

TEST(Kswarp, MatchesBruteForce) {
  GridConfig g = toy_grid();
  Rng rng(41);
  const std::size_t R = g.feature_rows(), C = g.feature_cols();
  Grid2D center(R, C, 2), corner(R, C, 2);
  for (double& v : center.data()) {
    v = rng.uniform();
  }
  for (double& v : corner.data()) {
    v = rng.uniform();
  }
  std::vector<ClassifiedBox> boxes;
  for (int i = 0; i < 200; ++i) {
    boxes.push_back({make_box(rng.uniform(-2, 27), rng.uniform(-14, 14), -1, rng.uniform(0.5, 5),
                              rng.uniform(0.5, 2.5), 1.5, rng.uniform(-kPi, kPi)),
                     i % 2,
                     {}});
  }
  const auto conf = kswarp(center, corner, boxes, g);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    EXPECT_NEAR(conf[i], brute_kswarp(center, corner, boxes[i].box, boxes[i].cls, g), 1e-12);
  }
}

TEST(Kswarp, MonotoneInHeat) {
  const GridConfig g = toy_grid();
  Rng rng(43);
  const std::size_t R = g.feature_rows(), C = g.feature_cols();
  Grid2D center(R, C, 1), corner(R, C, 1);
  for (double& v : center.data()) {
    v = rng.uniform(0, 0.2);
  }
  for (double& v : corner.data()) {
    v = rng.uniform(0, 0.2);
  }
  std::vector<ClassifiedBox> boxes;
  for (int i = 0; i < 50; ++i) {
    boxes.push_back({make_box(rng.uniform(1, 24), rng.uniform(-11, 11), -1, 4, 1.8, 1.5,
                              rng.uniform(-kPi, kPi)),
                     0,
                     {}});
  }
  const auto before = kswarp(center, corner, boxes, g);
  for (int t = 0; t < 50; ++t) {
    const auto r = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(R) - 1));
    const auto c = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(C) - 1));
    (t % 2 ? center : corner).at(r, c) += 0.5;
  }
  const auto after = kswarp(center, corner, boxes, g);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    EXPECT_GE(after[i], before[i]);
  }
}

TEST(Maxpool, Examples) {
  Grid2D flat(4, 5, 1, 0.3);
  const Grid2D pf = nn::maxpool2d_3x3_same(flat);
  for (double v : pf.data()) {
    EXPECT_EQ(v, 0.3);
  }
  Grid2D spike(5, 5, 1);
  spike.at(2, 2) = 7.0;
  const Grid2D ps = nn::maxpool2d_3x3_same(spike);
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 5; ++c) {
      const bool inside = r >= 1 && r <= 3 && c >= 1 && c <= 3;
      EXPECT_EQ(ps.at(r, c), inside ? 7.0 : 0.0);
    }
  }
}

TEST(Maxpool, MatchesBruteForce) {
  Rng rng(3);
  Grid2D m(9, 13, 3);
  for (double& v : m.data()) {
    v = rng.uniform(-1, 1);
  }
  const Grid2D p = nn::maxpool2d_3x3_same(m);
  for (std::size_t r = 0; r < m.height(); ++r) {
    for (std::size_t c = 0; c < m.width(); ++c) {
      for (std::size_t ch = 0; ch < 3; ++ch) {
        EXPECT_EQ(p.at(r, c, ch), oracle::brute_neighborhood_max(m, r, c, ch));
      }
    }
  }
}

TEST(PeakFilter, Examples) {
  InferConfig cfg;
  Grid2D m(5, 5, 1, 0.05);
  EXPECT_TRUE(peak_filter(m, cfg).empty());
  m.at(2, 3) = 0.8;
  const auto one = peak_filter(m, cfg);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].cell.row, 2u);
  EXPECT_EQ(one[0].cell.col, 3u);
  EXPECT_EQ(one[0].confidence, 0.8);
  // A plateau keeps every tied cell.
  m.at(2, 4) = 0.8;
  EXPECT_EQ(peak_filter(m, cfg).size(), 2u);
  cfg.max_detections = 1;
  const auto cut = peak_filter(m, cfg);
  ASSERT_EQ(cut.size(), 1u);
  EXPECT_EQ(cut[0].cell.col, 3u);
}

TEST(PeakFilter, MatchesBruteForce) {
  Rng rng(29);
  for (int t = 0; t < 20; ++t) {
    Grid2D m(11, 8, 2);
    for (double& v : m.data()) {
      // Coarse values so ties and plateaus occur.
      v = std::round(rng.uniform() * 8) / 8;
    }
    InferConfig cfg;
    cfg.threshold = 0.3;
    cfg.max_detections = 1000;
    const auto got = peak_filter(m, cfg);
    std::vector<std::tuple<double, int, std::size_t, std::size_t>> expected;
    for (std::size_t r = 0; r < m.height(); ++r) {
      for (std::size_t c = 0; c < m.width(); ++c) {
        for (std::size_t ch = 0; ch < 2; ++ch) {
          const double v = m.at(r, c, ch);
          if (v > cfg.threshold && v >= oracle::brute_neighborhood_max(m, r, c, ch)) {
            expected.emplace_back(-v, static_cast<int>(ch), r, c);
          }
        }
      }
    }
    std::sort(expected.begin(), expected.end());
    ASSERT_EQ(got.size(), expected.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].confidence, -std::get<0>(expected[i]));
      EXPECT_EQ(got[i].cell.cls, std::get<1>(expected[i]));
      EXPECT_EQ(got[i].cell.row, std::get<2>(expected[i]));
      EXPECT_EQ(got[i].cell.col, std::get<3>(expected[i]));
    }
  }
}

TEST(Detect, AllZeroMapsGiveNothing) {
  const GridConfig g = toy_grid();
  const auto maps = HeadMaps::zeros(g.feature_rows(), g.feature_cols(), 2);
  const auto res = detect(maps, g, InferConfig{});
  EXPECT_TRUE(res.detections.empty());
  EXPECT_TRUE(res.cells.empty());
}

TEST(Detect, RoundTripOneAndTwoBoxes) {
  EncoderConfig enc;
  enc.grid = toy_grid();
  enc.num_classes = 2;
  const std::vector<Box3D> one{make_box(7.37, 3.11, -0.8, 4.2, 1.7, 1.5, 2.5)};
  // Only encoded cells carry a valid box, so every other cell scores 0.
  InferConfig cfg;
  cfg.threshold = 0.0;
  const auto t1 = encode_targets(one, std::vector<int>{1}, enc);
  const auto r1 = detect(t1.maps, enc.grid, cfg);
  ASSERT_EQ(r1.detections.size(), 1u);
  EXPECT_EQ(r1.detections[0].cls, 1);
  expect_same_box(r1.detections[0].box, one[0], 1e-9);
  const std::vector<ClassifiedBox> cb{{one[0], 1, {}}};
  EXPECT_NEAR(r1.detections[0].confidence, kswarp(t1.maps.center, t1.maps.corner, cb, enc.grid)[0],
              1e-12);

  const std::vector<Box3D> two{make_box(5.0, -6.0, -0.8, 4.2, 1.7, 1.5, 0.1),
                               make_box(18.0, 7.0, -0.9, 0.8, 0.6, 1.7, -1.2)};
  const auto t2 = encode_targets(two, std::vector<int>{0, 1}, enc);
  const auto r2 = detect(t2.maps, enc.grid, cfg);
  ASSERT_EQ(r2.detections.size(), 2u);
  std::set<std::tuple<std::size_t, std::size_t, int>> cells;
  for (const auto& c : r2.cells) {
    cells.emplace(c.row, c.col, c.cls);
  }
  EXPECT_EQ(cells.size(), 2u);
  for (const auto& d : r2.detections) {
    expect_same_box(d.box, two[static_cast<std::size_t>(d.cls)], 1e-9);
  }
}

TEST(Detect, KswarpOffUsesRawCenterPeaks) {
  EncoderConfig enc;
  enc.grid = toy_grid();
  const std::vector<Box3D> one{make_box(9.9, 0.5, -0.8, 4.2, 1.7, 1.5, 0.7)};
  auto ts = encode_targets(one, std::vector<int>{0}, enc);
  const Peak p = ts.positives[0];
  ts.maps.center.at(p.row, p.col) = 0.73;
  InferConfig cfg;
  cfg.use_kswarp = false;
  const auto res = detect(ts.maps, enc.grid, cfg);
  ASSERT_EQ(res.detections.size(), 1u);
  EXPECT_EQ(res.detections[0].confidence, 0.73);
}

TEST(DetectionFiles, RoundTrip) {
  const ClassNames names{"Car", "Pedestrian"};
  const std::vector<Detection> dets{{make_box(1, 2, 3, 4, 2, 1.5, 0.25), 1, 0.625},
                                    {make_box(-1, 2, 0, 3, 2, 1.5, -3.0), 0, 0.125}};
  const auto back = parse_detections(format_detections(dets, names), names);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].cls, dets[i].cls);
    EXPECT_EQ(back[i].confidence, dets[i].confidence);
    expect_same_box(back[i].box, dets[i].box, 1e-12);
  }
  EXPECT_TRUE(parse_detections("", names).empty());
}

TEST(Kswarp, ThroughputSmoke) {
  GridConfig g;
  g.x_max = 80.0;
  g.y_min = -35.2;
  g.y_max = 35.2;
  g.vx = g.vy = 0.1;
  g.downsample = 4;
  ASSERT_EQ(g.feature_rows(), 200u);
  ASSERT_EQ(g.feature_cols(), 176u);
  Rng rng(1);
  Grid2D center(200, 176, 1), corner(200, 176, 1);
  for (double& v : center.data()) {
    v = rng.uniform();
  }
  corner = center;
  std::vector<ClassifiedBox> boxes;
  for (int i = 0; i < 50; ++i) {
    boxes.push_back({make_box(rng.uniform(1, 79), rng.uniform(-34, 34), -1, 4, 1.8, 1.5, 0.3), 0, {}});
  }
  const auto start = std::chrono::steady_clock::now();
  const auto conf = kswarp(center, corner, boxes, g);
  const std::chrono::duration<double, std::milli> ms = std::chrono::steady_clock::now() - start;
  EXPECT_EQ(conf.size(), 50u);
  // Timing is reported by the acceptance binary; this only guards gross regressions.
  EXPECT_LT(ms.count(), 100.0);
}
