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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cn3d/geom.hpp"
#include "cn3d/head_maps.hpp"
#include "cn3d/voxelize.hpp"

namespace cn3d {

struct EncoderConfig {
  GridConfig grid;
  int num_classes = 1;
  double min_overlap = 0.01;  // t: IoU kept by any center within the radius

  void validate() const;
};

/// Training targets for one frame.
struct TargetSet {
  HeadMaps maps;
  std::vector<Peak> positives;                 // one per ground-truth box
  std::vector<std::array<Vec3, 8>> gt_corners; // aligned with positives
  std::vector<std::size_t> box_index;          // source box of each positive
  std::vector<std::string> warnings;
};

/// Largest center displacement (in cells) that keeps IoU >= t, minimized over
/// three cases for an l x w box:
///   shifted copy (same size),
///   shrunk on all sides,
///   grown on all sides.
/// Each case is a quadratic in r; its smallest positive root is used.
double gaussian_radius(double l_cells, double w_cells, double t);

/// Splats exp(-d^2 / (2 sigma^2)) around integer cell (row, col) of channel
/// `ch`, keeping the element-wise max with existing values. The kernel spans a
/// (2*ceil(3 sigma)+1)^2 window; parts outside the grid are skipped.
void draw_gaussian(Grid2D& heat, std::size_t ch, long row, long col, double sigma);

/// Heatmap standard deviation used for a box: radius / 6, floored at 1/6 cell.
double gaussian_sigma(const Box3D& box, const EncoderConfig& cfg);

TargetSet encode_targets(std::span<const Box3D> boxes, std::span<const int> classes,
                         const EncoderConfig& cfg);

/// Writes each map in the grid dump format plus `positives.txt` listing
/// `row col class` and the 8 gt corners per positive.
void save_targets(const std::filesystem::path& dir, const TargetSet& targets);

}  // namespace cn3d
