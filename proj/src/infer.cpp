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

#include "cn3d/infer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cn3d/error.hpp"
#include "cn3d/nn.hpp"

namespace cn3d {

namespace {

// Five keypoints in continuous feature coordinates (row, col): center then
// the footprint corners.
std::array<Vec2, 5> keypoints(const Box3D& box, const GridConfig& grid) {
  std::array<Vec2, 5> kp;
  kp[0] = grid.to_feature(box.cx, box.cy);
  const auto corners = bev_corners(box);
  for (std::size_t k = 0; k < 4; ++k) {
    kp[k + 1] = grid.to_feature(corners[k].x, corners[k].y);
  }
  return kp;
}

double warp_confidence(const Grid2D& center_heat, const Grid2D& corner_heat,
                       const std::array<Vec2, 5>& kp, std::size_t ch, bool use_corners) {
  // bilinear_sample takes (column, row).
  const double center = bilinear_sample(center_heat, kp[0].y, kp[0].x, ch);
  if (!use_corners) {
    return std::clamp(center, 0.0, 1.0);
  }
  double sum = center;
  for (std::size_t k = 1; k < 5; ++k) {
    sum += bilinear_sample(corner_heat, kp[k].y, kp[k].x, ch);
  }
  return std::clamp(sum / 5.0, 0.0, 1.0);
}

// Returns false for a non-positive or non-finite decoded box.
bool decode_cell(const HeadMaps& maps, const GridConfig& grid, std::size_t row, std::size_t col,
                 Box3D& out) {
  const Vec2 xy = grid.from_feature(static_cast<double>(row) + maps.offset.at(row, col, 0),
                                    static_cast<double>(col) + maps.offset.at(row, col, 1));
  const double l = maps.size.at(row, col, 0);
  const double w = maps.size.at(row, col, 1);
  const double h = maps.size.at(row, col, 2);
  const double c = maps.direction.at(row, col, 0);
  const double s = maps.direction.at(row, col, 1);
  const double z = maps.z.at(row, col);
  if (!(l > 0.0 && w > 0.0 && h > 0.0) || !std::isfinite(l + w + h + z + xy.x + xy.y + c + s)) {
    return false;
  }
  out = Box3D{xy.x, xy.y, z, l, w, h, wrap_angle(std::atan2(s, c))};
  return true;
}

}  // namespace

void InferConfig::validate() const {
  if (!(threshold >= 0.0 && threshold <= 1.0) || max_detections < 1) {
    throw InvalidArgument("InferConfig: threshold must lie in [0,1] and max_detections >= 1");
  }
}

InferConfig infer_config_from_kv(const KeyValues& kv, const std::string& prefix) {
  InferConfig c;
  c.threshold = kv.get_double(prefix + "threshold", c.threshold);
  const auto k = kv.get_int(prefix + "max_detections", static_cast<long long>(c.max_detections));
  if (k < 1) {
    throw InvalidArgument("infer.max_detections must be >= 1");
  }
  c.max_detections = static_cast<std::size_t>(k);
  c.use_kswarp = kv.get_bool(prefix + "kswarp", c.use_kswarp);
  c.use_corners = kv.get_bool(prefix + "corners", c.use_corners);
  c.validate();
  return c;
}

AssembleResult assemble_boxes(std::span<const Peak> peaks, const HeadMaps& maps,
                              const GridConfig& grid) {
  maps.check();
  AssembleResult out;
  for (const auto& p : peaks) {
    if (p.row >= maps.rows() || p.col >= maps.cols()) {
      throw InvalidArgument("assemble_boxes: peak outside the map");
    }
    Box3D box;
    if (decode_cell(maps, grid, p.row, p.col, box)) {
      out.boxes.push_back({box, p.cls, p});
    } else {
      ++out.dropped;
    }
  }
  return out;
}

std::vector<double> kswarp(const Grid2D& center_heat, const Grid2D& corner_heat,
                           std::span<const ClassifiedBox> boxes, const GridConfig& grid,
                           bool use_corners) {
  if (!center_heat.same_shape(corner_heat)) {
    throw InvalidArgument("kswarp: center and corner heatmaps differ in shape");
  }
  std::vector<double> out;
  out.reserve(boxes.size());
  for (const auto& b : boxes) {
    if (b.cls < 0 || static_cast<std::size_t>(b.cls) >= center_heat.channels()) {
      throw InvalidArgument("kswarp: class id out of range");
    }
    out.push_back(warp_confidence(center_heat, corner_heat, keypoints(b.box, grid),
                                  static_cast<std::size_t>(b.cls), use_corners));
  }
  return out;
}

std::vector<ScoredPeak> peak_filter(const Grid2D& conf, const InferConfig& cfg) {
  cfg.validate();
  const Grid2D pooled = nn::maxpool2d_3x3_same(conf);
  std::vector<ScoredPeak> peaks;
  for (std::size_t r = 0; r < conf.height(); ++r) {
    for (std::size_t c = 0; c < conf.width(); ++c) {
      for (std::size_t ch = 0; ch < conf.channels(); ++ch) {
        const double v = conf.at(r, c, ch);
        if (v > cfg.threshold && v >= pooled.at(r, c, ch)) {
          peaks.push_back({{r, c, static_cast<int>(ch)}, v});
        }
      }
    }
  }
  std::sort(peaks.begin(), peaks.end(), [](const ScoredPeak& a, const ScoredPeak& b) {
    if (a.confidence != b.confidence) {
      return a.confidence > b.confidence;
    }
    if (a.cell.cls != b.cell.cls) {
      return a.cell.cls < b.cell.cls;
    }
    if (a.cell.row != b.cell.row) {
      return a.cell.row < b.cell.row;
    }
    return a.cell.col < b.cell.col;
  });
  if (peaks.size() > cfg.max_detections) {
    peaks.resize(cfg.max_detections);
  }
  return peaks;
}

DetectResult detect(const HeadMaps& maps, const GridConfig& grid, const InferConfig& cfg) {
  maps.check();
  cfg.validate();
  const std::size_t rows = maps.rows();
  const std::size_t cols = maps.cols();
  const std::size_t classes = maps.classes();
  DetectResult out;
  out.confidence = Grid2D(rows, cols, classes);

  // Decode a box at every cell, then warp confidences for each class.
  std::vector<Box3D> decoded(rows * cols);
  std::vector<bool> valid(rows * cols, false);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      Box3D box;
      if (!decode_cell(maps, grid, r, c, box)) {
        continue;
      }
      decoded[r * cols + c] = box;
      valid[r * cols + c] = true;
      const auto kp = keypoints(box, grid);
      for (std::size_t ch = 0; ch < classes; ++ch) {
        out.confidence.at(r, c, ch) =
            cfg.use_kswarp ? warp_confidence(maps.center, maps.corner, kp, ch, cfg.use_corners)
                           : std::clamp(maps.center.at(r, c, ch), 0.0, 1.0);
      }
    }
  }
  for (bool v : valid) {
    out.dropped += v ? 0 : 1;
  }

  for (const auto& p : peak_filter(out.confidence, cfg)) {
    out.detections.push_back({decoded[p.cell.row * cols + p.cell.col], p.cell.cls, p.confidence});
    out.cells.push_back(p.cell);
  }
  return out;
}

std::string format_detections(std::span<const Detection> dets, const ClassNames& names) {
  std::vector<LabelRecord> recs;
  recs.reserve(dets.size());
  for (const auto& d : dets) {
    if (d.cls < 0 || static_cast<std::size_t>(d.cls) >= names.size()) {
      throw InvalidArgument("format_detections: class id out of range");
    }
    recs.push_back({names[static_cast<std::size_t>(d.cls)], d.box, d.confidence});
  }
  return format_labels(recs);
}

std::vector<Detection> parse_detections(const std::string& text, const ClassNames& names) {
  std::vector<Detection> out;
  for (const auto& r : parse_labels(text, true)) {
    const auto it = std::find(names.begin(), names.end(), r.cls);
    if (it == names.end()) {
      throw InvalidArgument("detections: unknown class '" + r.cls + "'");
    }
    if (!r.confidence) {
      throw ParseError("detections: missing confidence column");
    }
    out.push_back({r.box, static_cast<int>(it - names.begin()), *r.confidence});
  }
  return out;
}

}  // namespace cn3d
