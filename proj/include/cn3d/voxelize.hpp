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

#include <cstddef>
#include <cstdint>
#include <map>
#include <tuple>

#include "cn3d/config.hpp"
#include "cn3d/geom.hpp"
#include "cn3d/pointcloud_io.hpp"

namespace cn3d {

/// Regular voxel grid over half-open ranges [min, max). `downsample` is the
/// feature-map stride R relative to voxel cells.
struct GridConfig {
  double x_min = 0.0, x_max = 70.0;
  double y_min = -40.0, y_max = 40.0;
  double z_min = -3.0, z_max = 1.0;
  double vx = 0.05, vy = 0.05, vz = 0.1;
  int downsample = 4;
  int voxel_cap = 5;  // points averaged per voxel, in input order

  /// Throws InvalidArgument unless extents are integer multiples of voxel
  /// sizes and the stride divides the x/y cell counts.
  void validate() const;

  std::size_t x_cells() const;
  std::size_t y_cells() const;
  std::size_t z_cells() const;
  /// Feature-map rows (x) and columns (y).
  std::size_t feature_rows() const { return x_cells() / static_cast<std::size_t>(downsample); }
  std::size_t feature_cols() const { return y_cells() / static_cast<std::size_t>(downsample); }

  /// Meters per feature cell along x and y.
  double feature_dx() const { return vx * downsample; }
  double feature_dy() const { return vy * downsample; }

  /// Continuous feature coordinates: row from x, column from y.
  Vec2 to_feature(double x, double y) const {
    return {(x - x_min) / feature_dx(), (y - y_min) / feature_dy()};
  }
  Vec2 from_feature(double row, double col) const {
    return {x_min + row * feature_dx(), y_min + col * feature_dy()};
  }

  bool contains_xy(double x, double y) const {
    return x >= x_min && x < x_max && y >= y_min && y < y_max;
  }
};

/// Reads `<prefix>x_range`, `y_range`, `z_range` ("lo hi"), `voxel` ("vx vy vz"),
/// `downsample` and `voxel_cap`.
GridConfig grid_config_from_kv(const KeyValues& kv, const std::string& prefix = "grid.");

struct VoxelIndex {
  std::int32_t ix = 0, iy = 0, iz = 0;
  auto operator<=>(const VoxelIndex&) const = default;
};

struct VoxelFeature {
  double x = 0.0, y = 0.0, z = 0.0, intensity = 0.0;  // means
  int count = 0;
};

struct VoxelGrid {
  GridConfig config;
  std::map<VoxelIndex, VoxelFeature> occupied;
  std::size_t dropped_out_of_range = 0;
  std::size_t dropped_over_cap = 0;

  std::size_t retained_points() const;
};

/// Mean voxel feature encoding of up to `voxel_cap` points per voxel.
VoxelGrid voxelize_mean(const PointCloud& cloud, const GridConfig& config);

inline constexpr std::size_t kBevChannels = 4;

/// Collapses height into a (x_cells/stride) x (y_cells/stride) x 4 plane:
///   0 occupied-voxel count / (stride^2 * z_cells)
///   1 mean z of retained points
///   2 mean intensity of retained points
///   3 max z of occupied voxel centers
/// These hand-built channels stand in for a learned collapse. `stride` = 0
/// uses config.downsample.
Grid2D bev_collapse(const VoxelGrid& grid, int stride = 0);

}  // namespace cn3d
