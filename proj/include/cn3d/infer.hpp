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

// NMS-free decoding: every cell decodes a box, KSWarp turns the center and
// corner heatmaps into a confidence per decoded box, and 3x3 local maxima of
// that confidence map become detections.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cn3d/config.hpp"
#include "cn3d/geom.hpp"
#include "cn3d/head_maps.hpp"
#include "cn3d/pointcloud_io.hpp"
#include "cn3d/voxelize.hpp"

namespace cn3d {

struct Detection {
  Box3D box;
  int cls = 0;
  double confidence = 0.0;
};

struct InferConfig {
  double threshold = 0.1;   // keep confidences strictly above
  std::size_t max_detections = 50;
  bool use_kswarp = true;   // off: confidence is the raw center heatmap
  bool use_corners = true;  // off: KSWarp samples the center heatmap only

  void validate() const;
};

/// Reads `<prefix>threshold`, `max_detections`, `kswarp`, `corners`.
InferConfig infer_config_from_kv(const KeyValues& kv, const std::string& prefix = "infer.");

struct ClassifiedBox {
  Box3D box;
  int cls = 0;
  Peak cell;
};

struct AssembleResult {
  std::vector<ClassifiedBox> boxes;
  std::size_t dropped = 0;  // non-positive decoded sizes
};

/// Decodes (row + offset, col + offset) -> meters, z and sizes as read, and
/// yaw = atan2(sin, cos). Boxes with a non-positive size are dropped and counted.
AssembleResult assemble_boxes(std::span<const Peak> peaks, const HeadMaps& maps,
                              const GridConfig& grid);

/// Mean of five bilinear samples per box: the center from center_heat and the
/// four footprint corners from corner_heat, both in the box's class channel.
/// With `use_corners` off the confidence is the center sample alone.
std::vector<double> kswarp(const Grid2D& center_heat, const Grid2D& corner_heat,
                           std::span<const ClassifiedBox> boxes, const GridConfig& grid,
                           bool use_corners = true);

struct ScoredPeak {
  Peak cell;
  double confidence = 0.0;
};

/// Cells >= all existing 8-neighbors in their channel and > threshold, top
/// max_detections overall; ties ordered by (class, row, column).
std::vector<ScoredPeak> peak_filter(const Grid2D& conf, const InferConfig& cfg);

struct DetectResult {
  std::vector<Detection> detections;
  std::vector<Peak> cells;  // source cell and class of each detection
  std::size_t dropped = 0;
  Grid2D confidence;  // C channels
};

DetectResult detect(const HeadMaps& maps, const GridConfig& grid, const InferConfig& cfg);

/// Native label lines with a trailing confidence column.
std::string format_detections(std::span<const Detection> dets, const ClassNames& names);
std::vector<Detection> parse_detections(const std::string& text, const ClassNames& names);

}  // namespace cn3d
