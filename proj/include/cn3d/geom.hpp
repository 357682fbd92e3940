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

// Oriented box geometry, rotated IoU, dense 2D maps and the bilinear kernel.
//
// Frames: LiDAR meters, x forward, y left, z up. A box footprint is the
// rectangle of length l along the heading (yaw about z) and width w across it.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace cn3d {

inline constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

/// Oriented 3D box. Use make_box() to get a validated instance with a wrapped yaw.
struct Box3D {
  double cx = 0.0;
  double cy = 0.0;
  double cz = 0.0;
  double l = 1.0;
  double w = 1.0;
  double h = 1.0;
  double yaw = 0.0;
};

/// Maps r into (-pi, pi]. Throws InvalidArgument for non-finite input.
double wrap_angle(double r);

/// Validates sizes (> 0, finite) and wraps the yaw.
Box3D make_box(double cx, double cy, double cz, double l, double w, double h, double yaw);

/// Throws InvalidArgument when a box violates its invariants.
void check_box(const Box3D& box);

/// Footprint corners: front-left, front-right, rear-right, rear-left.
std::array<Vec2, 4> bev_corners(const Box3D& box);

/// bev_corners() at z = cz - h/2 (first four) then at z = cz + h/2.
std::array<Vec3, 8> corners_3d(const Box3D& box);

/// Inverse of corners_3d() for corners in its canonical order.
Box3D box_from_corners(const std::array<Vec3, 8>& corners);

/// Shoelace area, absolute value.
double polygon_area(std::span<const Vec2> poly);

/// Sutherland-Hodgman clip of a convex polygon against a convex clip polygon.
/// Both may be given in either winding.
std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip);

/// Area of the footprint intersection. Slivers below 1e-12 m^2 count as zero.
double bev_intersection_area(const Box3D& a, const Box3D& b);

double rotated_iou_bev(const Box3D& a, const Box3D& b);
double iou_3d(const Box3D& a, const Box3D& b);

/// Point inside the closed box volume.
bool point_in_box(const Box3D& box, const Vec3& p);

/// Dense row-major (row, column, channel) map of doubles.
class Grid2D {
 public:
  Grid2D() = default;
  Grid2D(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0);
  Grid2D(std::size_t height, std::size_t width, std::size_t channels, std::vector<double> data);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }

  double& at(std::size_t row, std::size_t col, std::size_t ch = 0) {
    return data_[(row * width_ + col) * channels_ + ch];
  }
  double at(std::size_t row, std::size_t col, std::size_t ch = 0) const {
    return data_[(row * width_ + col) * channels_ + ch];
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const Grid2D& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  /// Copy of one channel as a single-channel map.
  Grid2D channel(std::size_t ch) const;

  void fill(double value);

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> data_;
};

/// Bilinear sampling kernel b(i, j, u, v) = max(1-|i-u|,0) * max(1-|j-v|,0).
inline double bilinear_kernel(double i, double j, double u, double v);

/// Samples channel `ch` at continuous column u and row v. Cells outside the grid read as 0.
double bilinear_sample(const Grid2D& map, double u, double v, std::size_t ch = 0);

inline double bilinear_kernel(double i, double j, double u, double v) {
  const double ku = 1.0 - (i > u ? i - u : u - i);
  const double kv = 1.0 - (j > v ? j - v : v - j);
  return (ku > 0.0 ? ku : 0.0) * (kv > 0.0 ? kv : 0.0);
}

}  // namespace cn3d
