#include <gtest/gtest.h>

#include <cmath>

#include "cn3d/error.hpp"
#include "cn3d/geom.hpp"
#include "oracles.hpp"

using namespace cn3d;

TEST(WrapAngle, Examples) {
  EXPECT_DOUBLE_EQ(wrap_angle(0.0), 0.0);
  EXPECT_NEAR(wrap_angle(1.5 * kPi), -0.5 * kPi, 1e-12);
  EXPECT_DOUBLE_EQ(wrap_angle(-kPi), kPi);
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
  EXPECT_THROW(wrap_angle(NAN), InvalidArgument);
  EXPECT_THROW(wrap_angle(INFINITY), InvalidArgument);
}

TEST(WrapAngle, RangeAndCongruence) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double r = rng.uniform(-50.0, 50.0);
    const double w = wrap_angle(r);
    EXPECT_GT(w, -kPi);
    EXPECT_LE(w, kPi);
    const double k = (r - w) / (2.0 * kPi);
    EXPECT_NEAR(k, std::round(k), 1e-9);
  }
}

TEST(BevCorners, AxisAlignedAndRotated) {
  const auto c0 = bev_corners(make_box(0, 0, 0, 4, 2, 1, 0));
  const double e0[4][2] = {{2, 1}, {2, -1}, {-2, -1}, {-2, 1}};
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(c0[i].x, e0[i][0], 1e-12);
    EXPECT_NEAR(c0[i].y, e0[i][1], 1e-12);
  }
  const auto c1 = bev_corners(make_box(0, 0, 0, 4, 2, 1, kPi / 2));
  const double e1[4][2] = {{-1, 2}, {1, 2}, {1, -2}, {-1, -2}};
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(c1[i].x, e1[i][0], 1e-12);
    EXPECT_NEAR(c1[i].y, e1[i][1], 1e-12);
  }
}

TEST(BevCorners, PairwiseDistances) {
  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    const Box3D b = oracle::random_box(rng);
    const auto c = bev_corners(b);
    const auto d = [&](int i, int j) { return std::hypot(c[i].x - c[j].x, c[i].y - c[j].y); };
    EXPECT_NEAR(d(0, 1), b.w, 1e-9);
    EXPECT_NEAR(d(1, 2), b.l, 1e-9);
    EXPECT_NEAR(d(2, 3), b.w, 1e-9);
    EXPECT_NEAR(d(3, 0), b.l, 1e-9);
    EXPECT_NEAR(d(0, 2), std::hypot(b.l, b.w), 1e-9);
    EXPECT_NEAR(d(1, 3), std::hypot(b.l, b.w), 1e-9);
  }
}

TEST(Corners3d, AxisAligned) {
  const auto c = corners_3d(make_box(0, 0, 1, 4, 2, 2, 0));
  for (int i = 0; i < 8; ++i) {
    EXPECT_NEAR(std::abs(c[i].x), 2.0, 1e-12);
    EXPECT_NEAR(std::abs(c[i].y), 1.0, 1e-12);
    EXPECT_NEAR(c[i].z, i < 4 ? 0.0 : 2.0, 1e-12);
  }
}

TEST(Corners3d, ZeroHeightRejected) {
  EXPECT_THROW(make_box(0, 0, 0, 4, 2, 0, 0), InvalidArgument);
  EXPECT_THROW(make_box(0, 0, 0, -1, 2, 1, 0), InvalidArgument);
  EXPECT_THROW(check_box(Box3D{0, 0, 0, 1, 1, 1, 4.0}), InvalidArgument);
}

TEST(Corners3d, IndependentReconstruction) {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const Box3D b = oracle::random_box(rng);
    const auto c = corners_3d(b);
    Vec3 mean;
    for (const auto& p : c) {
      mean.x += p.x / 8;
      mean.y += p.y / 8;
      mean.z += p.z / 8;
    }
    EXPECT_NEAR(mean.x, b.cx, 1e-9);
    EXPECT_NEAR(mean.y, b.cy, 1e-9);
    EXPECT_NEAR(mean.z, b.cz, 1e-9);
    EXPECT_NEAR(std::hypot(c[0].x - c[3].x, c[0].y - c[3].y), b.l, 1e-9);
    EXPECT_NEAR(std::hypot(c[0].x - c[1].x, c[0].y - c[1].y), b.w, 1e-9);
    EXPECT_NEAR(c[4].z - c[0].z, b.h, 1e-9);
    // Heading: from the rear edge midpoint to the front edge midpoint.
    const double fx = 0.5 * (c[0].x + c[1].x) - 0.5 * (c[2].x + c[3].x);
    const double fy = 0.5 * (c[0].y + c[1].y) - 0.5 * (c[2].y + c[3].y);
    EXPECT_NEAR(std::remainder(std::atan2(fy, fx) - b.yaw, 2 * kPi), 0.0, 1e-9);

    const Box3D r = box_from_corners(c);
    EXPECT_NEAR(r.cx, b.cx, 1e-9);
    EXPECT_NEAR(r.l, b.l, 1e-9);
    EXPECT_NEAR(r.w, b.w, 1e-9);
    EXPECT_NEAR(r.h, b.h, 1e-9);
    EXPECT_NEAR(std::remainder(r.yaw - b.yaw, 2 * kPi), 0.0, 1e-9);
  }
}

TEST(RotatedIou, Examples) {
  const Box3D a = make_box(0, 0, 0, 1, 1, 1, 0);
  EXPECT_NEAR(rotated_iou_bev(a, a), 1.0, 1e-12);
  EXPECT_NEAR(rotated_iou_bev(a, make_box(0.5, 0, 0, 1, 1, 1, 0)), 1.0 / 3.0, 1e-12);
  const double octagon = 2.0 * (std::sqrt(2.0) - 1.0);
  const double expected = octagon / (2.0 - octagon);
  const Box3D r = make_box(0, 0, 0, 1, 1, 1, kPi / 4);
  EXPECT_NEAR(rotated_iou_bev(a, r), expected, 1e-12);
  EXPECT_NEAR(rotated_iou_bev(a, r), oracle::monte_carlo_iou(a, r, 1000000, 1), 1e-3);
}

TEST(RotatedIou, DisjointAndTouching) {
  const Box3D a = make_box(0, 0, 0, 2, 2, 1, 0);
  EXPECT_EQ(rotated_iou_bev(a, make_box(5, 0, 0, 2, 2, 1, 0.3)), 0.0);
  const double touching = rotated_iou_bev(a, make_box(2, 0, 0, 2, 2, 1, 0));
  EXPECT_FALSE(std::isnan(touching));
  EXPECT_EQ(touching, 0.0);
}

TEST(RotatedIou, SymmetryAndRigidInvariance) {
  Rng rng(21);
  for (int t = 0; t < 1000; ++t) {
    Box3D a = oracle::random_box(rng, 2.0);
    Box3D b = oracle::random_box(rng, 2.0);
    const double ab = rotated_iou_bev(a, b);
    EXPECT_NEAR(ab, rotated_iou_bev(b, a), 1e-12);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0 + 1e-12);
    const double th = rng.uniform(-kPi, kPi);
    const double tx = rng.uniform(-30, 30);
    const double ty = rng.uniform(-30, 30);
    const auto move = [&](Box3D x) {
      const double c = std::cos(th), s = std::sin(th);
      return make_box(c * x.cx - s * x.cy + tx, s * x.cx + c * x.cy + ty, x.cz, x.l, x.w, x.h,
                      x.yaw + th);
    };
    EXPECT_NEAR(rotated_iou_bev(move(a), move(b)), ab, 1e-9);
  }
}

TEST(RotatedIou, MonteCarloAgreement) {
  Rng rng(8);
  for (int t = 0; t < 12; ++t) {
    const Box3D a = oracle::random_box(rng, 1.0);
    const Box3D b = oracle::random_box(rng, 1.0);
    EXPECT_NEAR(rotated_iou_bev(a, b), oracle::monte_carlo_iou(a, b, 1000000, 100 + t), 1e-3);
  }
}

TEST(Iou3d, Examples) {
  const Box3D a = make_box(1, 2, 0, 4, 2, 2, 0.4);
  EXPECT_NEAR(iou_3d(a, a), 1.0, 1e-12);
  EXPECT_NEAR(iou_3d(a, make_box(1, 2, 1, 4, 2, 2, 0.4)), 1.0 / 3.0, 1e-12);
  EXPECT_EQ(iou_3d(a, make_box(1, 2, 5, 4, 2, 2, 0.4)), 0.0);
}

TEST(Grid2D, LayoutAndChannel) {
  Grid2D g(2, 3, 2);
  EXPECT_EQ(g.size(), 12u);
  g.at(1, 2, 1) = 7.0;
  EXPECT_EQ(g.data()[(1 * 3 + 2) * 2 + 1], 7.0);
  const Grid2D c = g.channel(1);
  EXPECT_EQ(c.channels(), 1u);
  EXPECT_EQ(c.at(1, 2), 7.0);
  EXPECT_THROW(Grid2D(2, 2, 1, std::vector<double>(3)), InvalidArgument);
}

TEST(BilinearSample, Examples) {
  Grid2D m(2, 2, 1, {0, 1, 2, 3});
  EXPECT_DOUBLE_EQ(bilinear_sample(m, 1, 0), 1.0);
  EXPECT_DOUBLE_EQ(bilinear_sample(m, 0.5, 0.5), 1.5);
  EXPECT_DOUBLE_EQ(bilinear_sample(m, -0.5, 0), 0.5 * m.at(0, 0));
  Grid2D n(3, 3, 1, {5, 1, 1, 1, 1, 1, 1, 1, 1});
  EXPECT_DOUBLE_EQ(bilinear_sample(n, -0.5, 0), 2.5);
  EXPECT_EQ(bilinear_sample(n, -5.0, 1.0), 0.0);
}

TEST(BilinearSample, MatchesBruteForceSum) {
  Rng rng(13);
  Grid2D m(7, 9, 2);
  for (double& v : m.data()) {
    v = rng.uniform(-1, 1);
  }
  for (int t = 0; t < 2000; ++t) {
    const double u = rng.uniform(-2.0, 10.0);
    const double v = rng.uniform(-2.0, 8.0);
    const std::size_t ch = t % 2;
    EXPECT_NEAR(bilinear_sample(m, u, v, ch), oracle::brute_bilinear(m, u, v, ch), 1e-12);
  }
  // Integer and half-integer lattice points, including the far borders.
  for (double u = -1.0; u <= 9.0; u += 0.5) {
    for (double v = -1.0; v <= 7.0; v += 0.5) {
      EXPECT_NEAR(bilinear_sample(m, u, v), oracle::brute_bilinear(m, u, v), 1e-12);
    }
  }
}
