#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "cn3d/error.hpp"
#include "cn3d/pointcloud_io.hpp"
#include "oracles.hpp"

using namespace cn3d;

namespace {

std::vector<char> le_floats(std::initializer_list<float> values) {
  std::vector<char> out;
  for (float f : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    for (int i = 0; i < 4; ++i) {
      out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
    }
  }
  return out;
}

SceneSpec dense_spec() {
  SceneSpec s;
  s.classes = {ClassSizeSpec{"Car"}, ClassSizeSpec{"Pedestrian", {0.6, 1.0}, {0.5, 0.8}, {1.5, 1.9}},
               ClassSizeSpec{"Cyclist", {1.5, 1.9}, {0.5, 0.8}, {1.5, 1.9}}};
  s.clutter_density = 0.2;
  return s;
}

}  // namespace

TEST(KittiBin, Examples) {
  EXPECT_TRUE(read_kitti_bin({}).points.empty());
  const auto blob = le_floats({1.0f, 2.0f, 3.0f, 0.5f});
  const auto cloud = read_kitti_bin(blob);
  ASSERT_EQ(cloud.points.size(), 1u);
  EXPECT_EQ(cloud.points[0].x, 1.0);
  EXPECT_EQ(cloud.points[0].y, 2.0);
  EXPECT_EQ(cloud.points[0].z, 3.0);
  EXPECT_EQ(cloud.points[0].intensity, 0.5);

  auto bad = blob;
  bad.push_back(0);
  try {
    read_kitti_bin(bad);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("offset 16"), std::string::npos) << e.what();
  }
}

TEST(KittiBin, ReserializationIsByteIdentical) {
  Rng rng(4);
  std::vector<char> blob;
  for (int i = 0; i < 500; ++i) {
    const auto rec = le_floats({static_cast<float>(rng.uniform(-80, 80)),
                                static_cast<float>(rng.uniform(-80, 80)),
                                static_cast<float>(rng.uniform(-3, 3)),
                                static_cast<float>(rng.uniform(0, 1))});
    blob.insert(blob.end(), rec.begin(), rec.end());
  }
  EXPECT_EQ(write_kitti_bin(read_kitti_bin(blob)), blob);
}

TEST(Labels, Examples) {
  const auto recs = parse_labels("# header\n\nCar 10 0 -0.5 4 1.8 1.6 0\n");
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].cls, "Car");
  EXPECT_EQ(recs[0].box.cx, 10.0);
  EXPECT_EQ(recs[0].box.l, 4.0);

  try {
    parse_labels("Car 1 2 3 4 5 6 0\nCar 10 0 -0.5 4 1.8 1.6\n");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_labels("Car 10 0 -0.5 0 1.8 1.6 0\n"), Error);
  EXPECT_THROW(parse_labels("Car 10 0 -0.5 4 1.8 1.6 0 0.9\n"), ParseError);

  const auto wrapped = parse_labels("Car 0 0 0 4 2 2 5.0\n");
  EXPECT_NEAR(wrapped[0].box.yaw, 5.0 - 2 * kPi, 1e-12);
  EXPECT_NEAR(wrapped[0].box.yaw, -1.2832, 1e-4);
}

TEST(Labels, FormatRoundTrip) {
  Rng rng(9);
  std::vector<LabelRecord> recs;
  for (int i = 0; i < 50; ++i) {
    recs.push_back({i % 2 ? "Car" : "Cyclist", oracle::random_box(rng), std::nullopt});
  }
  const auto back = parse_labels(format_labels(recs));
  ASSERT_EQ(back.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(back[i].cls, recs[i].cls);
    EXPECT_EQ(back[i].box.cx, recs[i].box.cx);
    EXPECT_EQ(back[i].box.yaw, recs[i].box.yaw);
  }
  const auto scene = labels_to_scene(back, {"Car", "Cyclist"});
  EXPECT_EQ(scene.classes[0], 1);
  EXPECT_EQ(scene.classes[1], 0);
  EXPECT_THROW(labels_to_scene(back, {"Car"}), InvalidArgument);
  EXPECT_EQ(labels_to_scene(back, {"Car"}, true).boxes.size(), 25u);
}

TEST(KittiCamera, ConvertsWithIdentityLikeCalibration) {
  // Camera frame x right, y down, z forward; velo x forward, y left, z up.
  const std::string calib =
      "P0: 1 0 0 0 0 1 0 0 0 0 1 0\n"
      "R0_rect: 1 0 0 0 1 0 0 0 1\n"
      "Tr_velo_to_cam: 0 -1 0 0 0 0 -1 0 1 0 0 0\n";
  const auto cal = parse_kitti_calib(calib);
  // Bottom center at camera (1, 1.5, 10): velo (10, -1, -1.5); h = 1.5 lifts the center to z = -0.75.
  const auto recs = convert_kitti_camera_labels(
      "Car 0.0 0 0.0 0 0 0 0 1.5 1.6 3.9 1 1.5 10 0\nDontCare -1 -1 -10 0 0 0 0 -1 -1 -1 -1000 -1000 -1000 -10\n",
      cal);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_NEAR(recs[0].box.cx, 10.0, 1e-9);
  EXPECT_NEAR(recs[0].box.cy, -1.0, 1e-9);
  EXPECT_NEAR(recs[0].box.cz, -0.75, 1e-9);
  EXPECT_NEAR(recs[0].box.l, 3.9, 1e-9);
  EXPECT_NEAR(recs[0].box.w, 1.6, 1e-9);
  EXPECT_NEAR(recs[0].box.h, 1.5, 1e-9);
  // ry = 0 faces camera +x, i.e. velo -y.
  EXPECT_NEAR(recs[0].box.yaw, -kPi / 2, 1e-9);
}

TEST(Synth, EmptySpec) {
  SceneSpec s;
  s.boxes_min = s.boxes_max = 0;
  s.clutter_density = 0.0;
  const auto scene = synth_scene(s, 1);
  EXPECT_TRUE(scene.boxes.empty());
  EXPECT_TRUE(scene.cloud.points.empty());
}

TEST(Synth, Deterministic) {
  const auto a = synth_scene(dense_spec(), 77);
  const auto b = synth_scene(dense_spec(), 77);
  ASSERT_EQ(a.cloud.points.size(), b.cloud.points.size());
  EXPECT_EQ(std::memcmp(a.cloud.points.data(), b.cloud.points.data(),
                        a.cloud.points.size() * sizeof(Point)),
            0);
  ASSERT_EQ(a.boxes.size(), b.boxes.size());
  for (std::size_t i = 0; i < a.boxes.size(); ++i) {
    EXPECT_EQ(a.boxes[i].cx, b.boxes[i].cx);
    EXPECT_EQ(a.boxes[i].yaw, b.boxes[i].yaw);
  }
  EXPECT_NE(synth_scene(dense_spec(), 78).boxes[0].cx, a.boxes[0].cx);
}

TEST(Synth, SceneInvariants) {
  const SceneSpec spec = dense_spec();
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const auto scene = synth_scene(spec, seed);
    EXPECT_NO_THROW(check_scene(scene));
    EXPECT_GE(scene.boxes.size(), static_cast<std::size_t>(spec.boxes_min));
    EXPECT_LE(scene.boxes.size(), static_cast<std::size_t>(spec.boxes_max));
    for (std::size_t i = 0; i < scene.boxes.size(); ++i) {
      const Box3D& b = scene.boxes[i];
      for (const auto& c : bev_corners(b)) {
        EXPECT_GE(c.x, spec.x_range[0]);
        EXPECT_LT(c.x, spec.x_range[1]);
        EXPECT_GE(c.y, spec.y_range[0]);
        EXPECT_LT(c.y, spec.y_range[1]);
      }
      for (std::size_t j = i + 1; j < scene.boxes.size(); ++j) {
        EXPECT_EQ(rotated_iou_bev(b, scene.boxes[j]), 0.0);
      }
      for (const auto& p : scene.cloud.points) {
        const double d = std::sqrt((p.x - b.cx) * (p.x - b.cx) + (p.y - b.cy) * (p.y - b.cy) +
                                   (p.z - b.cz) * (p.z - b.cz));
        EXPECT_GT(d, 0.2);
      }
    }
  }
}

TEST(Synth, PointsLieOnVisibleFaces) {
  SceneSpec spec;
  spec.clutter_density = 0.0;
  const auto scene = synth_scene(spec, 5);
  for (const auto& p : scene.cloud.points) {
    // Each point is within jitter of some box surface: inside the box grown by
    // 1 cm but not inside the box shrunk by 1 cm.
    bool on_surface = false;
    for (const auto& b : scene.boxes) {
      const double c = std::cos(b.yaw), s = std::sin(b.yaw);
      const double along = c * (p.x - b.cx) + s * (p.y - b.cy);
      const double across = -s * (p.x - b.cx) + c * (p.y - b.cy);
      const double up = p.z - b.cz;
      const double m = spec.jitter * std::sqrt(2.0) + 1e-9;
      const bool grown = std::abs(along) <= b.l / 2 + m && std::abs(across) <= b.w / 2 + m &&
                         std::abs(up) <= b.h / 2 + m;
      const bool shrunk = std::abs(along) < b.l / 2 - m && std::abs(across) < b.w / 2 - m &&
                          std::abs(up) < b.h / 2 - m;
      on_surface = on_surface || (grown && !shrunk);
      // The bottom face is never sampled.
      EXPECT_FALSE(up < -b.h / 2 + m && std::abs(along) < b.l / 2 - m &&
                   std::abs(across) < b.w / 2 - m && grown);
    }
    EXPECT_TRUE(on_surface);
  }
}

TEST(Synth, InfeasibleSpecRaisesPlacementError) {
  SceneSpec s;
  s.x_range = {0.0, 6.0};
  s.y_range = {-3.0, 3.0};
  s.sensor_clearance = 0.0;
  s.boxes_min = s.boxes_max = 6;
  s.max_retries = 20;
  EXPECT_THROW(synth_scene(s, 3), PlacementError);
}

TEST(SceneSpec, KeyValueParsing) {
  const auto kv = KeyValues::parse(
      "classes = Car,Pedestrian\nboxes_max = 3\nPedestrian.length = 0.7 0.9\nx_range = 0 30\n");
  const SceneSpec s = scene_spec_from_kv(kv);
  ASSERT_EQ(s.classes.size(), 2u);
  EXPECT_EQ(s.classes[1].length[0], 0.7);
  EXPECT_EQ(s.boxes_max, 3);
  EXPECT_EQ(s.x_range[1], 30.0);
  EXPECT_THROW(scene_spec_from_kv(KeyValues::parse("bogus = 1\n")), InvalidArgument);
  EXPECT_THROW(scene_spec_from_kv(KeyValues::parse("boxes_min = 4\nboxes_max = 2\n")),
               InvalidArgument);
}

TEST(Augment, Examples) {
  LabeledScene scene;
  scene.boxes = {make_box(10, 0, 0, 4, 2, 1.5, 0)};
  scene.classes = {0};
  scene.cloud.points = {{11, 0.5, 0.2, 0.3}};
  const auto same = augment_global(scene, {});
  EXPECT_EQ(same.boxes[0].cx, 10.0);
  EXPECT_EQ(same.cloud.points[0].y, 0.5);

  const auto rot = augment_global(scene, {false, kPi / 2, 1.0});
  EXPECT_NEAR(rot.boxes[0].cx, 0.0, 1e-12);
  EXPECT_NEAR(rot.boxes[0].cy, 10.0, 1e-12);
  EXPECT_NEAR(rot.boxes[0].yaw, kPi / 2, 1e-12);

  const auto flip = augment_global(scene, {true, 0.0, 2.0});
  EXPECT_NEAR(flip.cloud.points[0].y, -1.0, 1e-12);
  EXPECT_NEAR(flip.boxes[0].l, 8.0, 1e-12);
  EXPECT_THROW(augment_global(scene, {false, 0.0, 0.0}), InvalidArgument);
}

TEST(Augment, MembershipAndInverse) {
  Rng rng(31);
  const SceneSpec spec = dense_spec();
  for (int t = 0; t < 40; ++t) {
    auto scene = synth_scene(spec, 100 + t);
    // Add free-space points so both inside and outside cases occur.
    for (int i = 0; i < 200; ++i) {
      const Box3D& b = scene.boxes[static_cast<std::size_t>(i) % scene.boxes.size()];
      scene.cloud.points.push_back({b.cx + rng.uniform(-3, 3), b.cy + rng.uniform(-3, 3),
                                    b.cz + rng.uniform(-1, 1), 0.5});
    }
    const AugmentParams p = sample_augment(rng);
    const auto aug = augment_global(scene, p);
    for (std::size_t i = 0; i < scene.cloud.points.size(); i += 3) {
      const auto& a = scene.cloud.points[i];
      const auto& b = aug.cloud.points[i];
      for (std::size_t k = 0; k < scene.boxes.size(); ++k) {
        const Box3D& bx = scene.boxes[k];
        // Skip points within 1e-9 of a face where rounding decides membership.
        const double c = std::cos(bx.yaw), s = std::sin(bx.yaw);
        const double along = c * (a.x - bx.cx) + s * (a.y - bx.cy);
        const double across = -s * (a.x - bx.cx) + c * (a.y - bx.cy);
        const double slack = std::min({std::abs(std::abs(along) - bx.l / 2),
                                       std::abs(std::abs(across) - bx.w / 2),
                                       std::abs(std::abs(a.z - bx.cz) - bx.h / 2)});
        if (slack < 1e-9) {
          continue;
        }
        EXPECT_EQ(point_in_box(bx, {a.x, a.y, a.z}), point_in_box(aug.boxes[k], {b.x, b.y, b.z}));
      }
    }
    const auto back = augment_global(aug, p.inverse());
    for (std::size_t i = 0; i < scene.cloud.points.size(); ++i) {
      EXPECT_NEAR(back.cloud.points[i].x, scene.cloud.points[i].x, 1e-9);
      EXPECT_NEAR(back.cloud.points[i].y, scene.cloud.points[i].y, 1e-9);
      EXPECT_NEAR(back.cloud.points[i].z, scene.cloud.points[i].z, 1e-9);
    }
    for (std::size_t k = 0; k < scene.boxes.size(); ++k) {
      EXPECT_NEAR(back.boxes[k].cx, scene.boxes[k].cx, 1e-9);
      EXPECT_NEAR(back.boxes[k].cy, scene.boxes[k].cy, 1e-9);
      EXPECT_NEAR(back.boxes[k].l, scene.boxes[k].l, 1e-9);
      EXPECT_NEAR(std::remainder(back.boxes[k].yaw - scene.boxes[k].yaw, 2 * kPi), 0.0, 1e-9);
    }
  }
}
