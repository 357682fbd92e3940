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
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cn3d/config.hpp"
#include "cn3d/geom.hpp"
#include "cn3d/infer.hpp"
#include "cn3d/pointcloud_io.hpp"

namespace cn3d {

enum class IouMode { kBev, k3d };

struct EvalConfig {
  /// Per-class IoU thresholds; classes beyond the list use `default_threshold`.
  std::vector<double> thresholds;
  double default_threshold = 0.7;
  IouMode mode = IouMode::kBev;
  std::size_t recall_positions = 40;

  double threshold_for(int cls) const;
  void validate() const;
};

/// 0.7 for car-like classes, 0.5 for Pedestrian and Cyclist.
EvalConfig default_eval_config(const ClassNames& names, IouMode mode = IouMode::kBev);

struct ScoredFlag {
  double confidence = 0.0;
  bool true_positive = false;
};

struct MatchResult {
  std::vector<ScoredFlag> detections;
  std::size_t num_gt = 0;

  /// Appends another frame's result.
  void merge(const MatchResult& other);
};

/// Greedy matching for one frame and one class: detections in descending
/// confidence claim the unmatched ground truth of highest IoU if it reaches
/// `threshold`.
MatchResult match_detections(std::span<const Detection> dets, std::span<const Box3D> gts,
                             double threshold, IouMode mode);

/// Mean interpolated precision at recall k/positions, k = 1..positions.
/// Throws InvalidArgument when there is no ground truth.
double ap_at_recall_positions(const MatchResult& result, std::size_t positions = 40);
inline double ap40(const MatchResult& result) { return ap_at_recall_positions(result, 40); }

/// NDS = (5 mAP + sum(1 - min(1, err))) / 10 over the five true-positive errors.
double nds(double map, const std::array<double, 5>& errors);

/// Reads `mATE mASE mAOE mAVE mAAE` (and optionally `mAP`) from `key value` lines.
struct MtpSidecar {
  std::array<double, 5> errors{};
  std::optional<double> map;
};
MtpSidecar parse_mtp_sidecar(const std::string& text);

struct Frame {
  std::vector<Detection> detections;
  std::vector<Box3D> gt_boxes;
  std::vector<int> gt_classes;
};

struct ClassReport {
  std::string name;
  std::size_t num_gt = 0;
  std::size_t num_det = 0;
  double ap_bev = 0.0;
  double ap_3d = 0.0;
  bool defined = false;  // false when the class has no ground truth
};

/// Per-class AP (BEV and 3D) over a dataset of frames.
std::vector<ClassReport> evaluate(std::span<const Frame> frames, const ClassNames& names,
                                  const EvalConfig& cfg);

std::string format_report(std::span<const ClassReport> report, std::size_t positions);

}  // namespace cn3d
