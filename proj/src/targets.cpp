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

#include "cn3d/targets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "cn3d/error.hpp"
#include "cn3d/grid_io.hpp"

namespace cn3d {

void HeadMaps::check() const {
  const std::size_t h = center.height();
  const std::size_t w = center.width();
  const std::size_t c = center.channels();
  auto expect = [&](const Grid2D& g, std::size_t ch, const char* name) {
    if (g.height() != h || g.width() != w || g.channels() != ch) {
      throw InvalidArgument(std::string("HeadMaps: map '") + name + "' has shape " +
                            std::to_string(g.height()) + "x" + std::to_string(g.width()) + "x" +
                            std::to_string(g.channels()) + ", expected " + std::to_string(h) +
                            "x" + std::to_string(w) + "x" + std::to_string(ch));
    }
  };
  if (c == 0) {
    throw InvalidArgument("HeadMaps: zero classes");
  }
  expect(corner, c, "corner");
  expect(offset, 2, "offset");
  expect(z, 1, "z");
  expect(size, 3, "size");
  expect(direction, 2, "direction");
}

void EncoderConfig::validate() const {
  grid.validate();
  if (num_classes < 1) {
    throw InvalidArgument("EncoderConfig: num_classes must be >= 1");
  }
  if (!(min_overlap > 0.0 && min_overlap <= 1.0)) {
    throw InvalidArgument("EncoderConfig: min_overlap must lie in (0, 1]");
  }
}

double gaussian_radius(double l_cells, double w_cells, double t) {
  if (!(l_cells > 0.0) || !(w_cells > 0.0) || !std::isfinite(l_cells) || !std::isfinite(w_cells)) {
    throw InvalidArgument("gaussian_radius: dimensions must be positive");
  }
  if (!(t > 0.0 && t <= 1.0)) {
    throw InvalidArgument("gaussian_radius: t must lie in (0, 1]");
  }
  const double s = l_cells + w_cells;
  const double area = l_cells * w_cells;

  // Smaller roots written as 2c / (b + sqrt(D)) to avoid cancellation.
  // Shifted copy: r^2 - s r + area (1-t)/(1+t) = 0.
  const double c1 = area * (1.0 - t) / (1.0 + t);
  const double r1 = 2.0 * c1 / (s + std::sqrt(std::max(0.0, s * s - 4.0 * c1)));
  // Shrunk: 4 r^2 - 2 s r + (1-t) area = 0.
  const double c2 = (1.0 - t) * area;
  const double r2 = 2.0 * c2 / (2.0 * s + std::sqrt(std::max(0.0, 4.0 * s * s - 16.0 * c2)));
  // Grown: 4t r^2 + 2t s r - (1-t) area = 0, single positive root.
  const double r3 =
      2.0 * c2 / (2.0 * t * s + std::sqrt(4.0 * t * t * s * s + 16.0 * t * c2));
  return std::max(0.0, std::min({r1, r2, r3}));
}

void draw_gaussian(Grid2D& heat, std::size_t ch, long row, long col, double sigma) {
  if (!(sigma > 0.0)) {
    throw InvalidArgument("draw_gaussian: sigma must be positive");
  }
  const long half = static_cast<long>(std::ceil(3.0 * sigma));
  const long h = static_cast<long>(heat.height());
  const long w = static_cast<long>(heat.width());
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (long r = std::max(0L, row - half); r <= std::min(h - 1, row + half); ++r) {
    for (long c = std::max(0L, col - half); c <= std::min(w - 1, col + half); ++c) {
      const double dr = static_cast<double>(r - row);
      const double dc = static_cast<double>(c - col);
      const double k = std::exp(-(dr * dr + dc * dc) * inv);
      double& cell = heat.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c), ch);
      cell = std::max(cell, k);
    }
  }
}

double gaussian_sigma(const Box3D& box, const EncoderConfig& cfg) {
  const double radius = gaussian_radius(box.l / cfg.grid.feature_dx(),
                                        box.w / cfg.grid.feature_dy(), cfg.min_overlap);
  return std::max(radius / 6.0, 1.0 / 6.0);
}

TargetSet encode_targets(std::span<const Box3D> boxes, std::span<const int> classes,
                         const EncoderConfig& cfg) {
  cfg.validate();
  if (boxes.size() != classes.size()) {
    throw InvalidArgument("encode_targets: boxes and classes differ in length");
  }
  const auto& grid = cfg.grid;
  const std::size_t rows = grid.feature_rows();
  const std::size_t cols = grid.feature_cols();
  TargetSet ts;
  ts.maps = HeadMaps::zeros(rows, cols, static_cast<std::size_t>(cfg.num_classes));

  std::map<std::pair<std::size_t, std::size_t>, std::size_t> slot_of_cell;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const Box3D& box = boxes[i];
    check_box(box);
    const int cls = classes[i];
    if (cls < 0 || cls >= cfg.num_classes) {
      throw InvalidArgument("encode_targets: class id " + std::to_string(cls) + " out of range");
    }
    if (!grid.contains_xy(box.cx, box.cy)) {
      throw InvalidArgument("encode_targets: box " + std::to_string(i) +
                            " center lies outside the grid");
    }
    const Vec2 f = grid.to_feature(box.cx, box.cy);
    const auto row = std::min(static_cast<std::size_t>(std::floor(f.x)), rows - 1);
    const auto col = std::min(static_cast<std::size_t>(std::floor(f.y)), cols - 1);
    const double sigma = gaussian_sigma(box, cfg);
    const auto ch = static_cast<std::size_t>(cls);

    draw_gaussian(ts.maps.center, ch, static_cast<long>(row), static_cast<long>(col), sigma);
    for (const auto& corner : bev_corners(box)) {
      const Vec2 fc = grid.to_feature(corner.x, corner.y);
      draw_gaussian(ts.maps.corner, ch, static_cast<long>(std::floor(fc.x)),
                    static_cast<long>(std::floor(fc.y)), sigma);
    }

    ts.maps.offset.at(row, col, 0) = f.x - static_cast<double>(row);
    ts.maps.offset.at(row, col, 1) = f.y - static_cast<double>(col);
    ts.maps.z.at(row, col) = box.cz;
    ts.maps.size.at(row, col, 0) = box.l;
    ts.maps.size.at(row, col, 1) = box.w;
    ts.maps.size.at(row, col, 2) = box.h;
    ts.maps.direction.at(row, col, 0) = std::cos(box.yaw);
    ts.maps.direction.at(row, col, 1) = std::sin(box.yaw);

    const Peak peak{row, col, cls};
    const auto key = std::make_pair(row, col);
    const auto it = slot_of_cell.find(key);
    if (it != slot_of_cell.end()) {
      // Regression maps are shared by all classes, so the later box owns the cell.
      const std::size_t slot = it->second;
      ts.warnings.push_back("encode_targets: box " + std::to_string(i) + " collides with box " +
                            std::to_string(ts.box_index[slot]) + " at cell (" +
                            std::to_string(row) + ", " + std::to_string(col) +
                            "); regression targets overwritten");
      ts.positives[slot] = peak;
      ts.gt_corners[slot] = corners_3d(box);
      ts.box_index[slot] = i;
    } else {
      slot_of_cell.emplace(key, ts.positives.size());
      ts.positives.push_back(peak);
      ts.gt_corners.push_back(corners_3d(box));
      ts.box_index.push_back(i);
    }
  }
  return ts;
}

void save_targets(const std::filesystem::path& dir, const TargetSet& ts) {
  std::filesystem::create_directories(dir);
  save_grid(dir / "center_heat.grid", ts.maps.center);
  save_grid(dir / "corner_heat.grid", ts.maps.corner);
  save_grid(dir / "offset.grid", ts.maps.offset);
  save_grid(dir / "z.grid", ts.maps.z);
  save_grid(dir / "size.grid", ts.maps.size);
  save_grid(dir / "direction.grid", ts.maps.direction);
  std::ostringstream os;
  os.precision(17);
  os << "# row col class  then 8 corners x y z (bottom 4, top 4)\n";
  for (std::size_t i = 0; i < ts.positives.size(); ++i) {
    const auto& p = ts.positives[i];
    os << p.row << ' ' << p.col << ' ' << p.cls;
    for (const auto& c : ts.gt_corners[i]) {
      os << ' ' << c.x << ' ' << c.y << ' ' << c.z;
    }
    os << '\n';
  }
  write_file_text(dir / "positives.txt", os.str());
}

}  // namespace cn3d
