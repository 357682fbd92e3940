// Copyright 2026 The cn3d Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cn3d/config.hpp"
#include "cn3d/geom.hpp"
#include "cn3d/rng.hpp"

namespace cn3d {

struct Point {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double intensity = 0.0;
};

struct PointCloud {
  std::vector<Point> points;
};

/// Ordered class-name table; a class id is an index into it.
using ClassNames = std::vector<std::string>;

struct LabeledScene {
  PointCloud cloud;
  std::vector<Box3D> boxes;
  std::vector<int> classes;  // aligned with boxes
};

/// Throws InvalidArgument when boxes/classes disagree or a box or point is invalid.
void check_scene(const LabeledScene& scene);

// --- KITTI velodyne ----------------------------------------------------------

/// Little-endian float32 (x, y, z, intensity) records, no header.
PointCloud read_kitti_bin(std::span<const char> bytes);
std::vector<char> write_kitti_bin(const PointCloud& cloud);

PointCloud load_kitti_bin(const std::filesystem::path& path);
void save_kitti_bin(const std::filesystem::path& path, const PointCloud& cloud);

// --- Native labels -------------------------------------------------------------

/// One box per line: `class cx cy cz l w h yaw` (LiDAR frame). An optional
/// trailing column is accepted only when `allow_confidence` is set.
struct LabelRecord {
  std::string cls;
  Box3D box;
  std::optional<double> confidence;
};

std::vector<LabelRecord> parse_labels(const std::string& text, bool allow_confidence = false);
std::string format_labels(std::span<const LabelRecord> records);

/// Maps label class names to ids. Unknown names throw unless `skip_unknown`.
LabeledScene labels_to_scene(std::span<const LabelRecord> records, const ClassNames& names,
                             bool skip_unknown = false);

// --- KITTI camera-frame labels ---------------------------------------------------

/// Rectification and LiDAR-to-camera transform from a KITTI calib file.
struct KittiCalib {
  std::array<double, 9> r0_rect{};        // row-major 3x3
  std::array<double, 12> velo_to_cam{};   // row-major 3x4
};

KittiCalib parse_kitti_calib(const std::string& text);

/// Converts KITTI object labels (camera frame, bottom-center, ry) into native
/// LiDAR-frame records. DontCare lines are skipped.
std::vector<LabelRecord> convert_kitti_camera_labels(const std::string& label_text,
                                                     const KittiCalib& calib);

// --- Synthetic scenes -----------------------------------------------------------

struct ClassSizeSpec {
  std::string name;
  std::array<double, 2> length{3.6, 4.4};
  std::array<double, 2> width{1.6, 1.9};
  std::array<double, 2> height{1.4, 1.7};
};

/// Parameters of the synthetic scene generator. Points are sampled on the two
/// sensor-facing vertical faces and the top face of each box, so box centers
/// sit in empty space.
struct SceneSpec {
  std::vector<ClassSizeSpec> classes{ClassSizeSpec{"Car"}};
  int boxes_min = 2;
  int boxes_max = 6;
  std::array<double, 2> x_range{0.0, 70.0};
  std::array<double, 2> y_range{-40.0, 40.0};
  std::array<double, 2> yaw_range{-kPi, kPi};
  double ground_z = -1.7;
  int points_min = 150;
  int points_max = 400;
  double clutter_density = 0.0;  // ground points per square meter
  double edge_margin = 0.5;      // keep footprints this far inside the range
  double min_gap = 0.3;          // BEV clearance between boxes
  double sensor_clearance = 2.0; // keep footprints this far from the sensor
  int max_retries = 200;         // per box
  double jitter = 0.01;
  double intensity_noise = 0.05;

  ClassNames class_names() const;
  /// Throws InvalidArgument on inconsistent parameters.
  void validate() const;
};

/// Reads a spec from flat key-value text; unknown keys are rejected. Keys:
///   classes, boxes_min, boxes_max, x_range, y_range, yaw_range, ground_z,
///   points_min, points_max, clutter_density, edge_margin, min_gap,
///   sensor_clearance, max_retries, jitter, intensity_noise,
///   <Class>.length, <Class>.width, <Class>.height  (each "lo hi")
SceneSpec scene_spec_from_kv(const KeyValues& kv, const std::string& prefix = "");

/// Deterministic for a given (spec, seed). Throws PlacementError when boxes
/// cannot be placed without overlap.
LabeledScene synth_scene(const SceneSpec& spec, std::uint64_t seed);

// --- Global augmentation ---------------------------------------------------------

/// Applied in order: flip (y -> -y), rotation about z, uniform scaling.
struct AugmentParams {
  bool flip = false;
  double rotation = 0.0;
  double scale = 1.0;

  /// Parameters that undo this augmentation when passed to augment_global().
  AugmentParams inverse() const;
};

LabeledScene augment_global(const LabeledScene& scene, const AugmentParams& params);

/// Flip with probability 1/2, rotation in [-pi/4, pi/4], scale in [0.95, 1.05].
AugmentParams sample_augment(Rng& rng);

}  // namespace cn3d
