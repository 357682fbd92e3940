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

#include "cn3d/voxelize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cn3d/error.hpp"

namespace cn3d {

namespace {

std::size_t cell_count(double lo, double hi, double v, const char* axis) {
  if (!(v > 0.0) || !(hi > lo)) {
    throw InvalidArgument(std::string("GridConfig: bad ") + axis + " range or voxel size");
  }
  const double n = (hi - lo) / v;
  const double r = std::round(n);
  if (std::abs(n - r) > 1e-6 * std::max(1.0, r) || r < 1.0) {
    throw InvalidArgument(std::string("GridConfig: ") + axis +
                          " extent is not a multiple of the voxel size");
  }
  return static_cast<std::size_t>(r);
}

std::array<double, 2> pair_or(const KeyValues& kv, const std::string& key,
                              std::array<double, 2> fallback) {
  const auto v = kv.get_doubles(key, {fallback[0], fallback[1]});
  if (v.size() != 2) {
    throw InvalidArgument("config key '" + key + "' needs two values");
  }
  return {v[0], v[1]};
}

}  // namespace

std::size_t GridConfig::x_cells() const { return cell_count(x_min, x_max, vx, "x"); }
std::size_t GridConfig::y_cells() const { return cell_count(y_min, y_max, vy, "y"); }
std::size_t GridConfig::z_cells() const { return cell_count(z_min, z_max, vz, "z"); }

void GridConfig::validate() const {
  const auto nx = x_cells();
  const auto ny = y_cells();
  (void)z_cells();
  if (downsample < 1) {
    throw InvalidArgument("GridConfig: downsample must be >= 1");
  }
  const auto r = static_cast<std::size_t>(downsample);
  if (nx % r != 0 || ny % r != 0) {
    throw InvalidArgument("GridConfig: downsample " + std::to_string(downsample) +
                          " does not divide the x/y cell counts");
  }
  if (voxel_cap < 1) {
    throw InvalidArgument("GridConfig: voxel_cap must be >= 1");
  }
}

GridConfig grid_config_from_kv(const KeyValues& kv, const std::string& prefix) {
  GridConfig g;
  const auto xr = pair_or(kv, prefix + "x_range", {g.x_min, g.x_max});
  const auto yr = pair_or(kv, prefix + "y_range", {g.y_min, g.y_max});
  const auto zr = pair_or(kv, prefix + "z_range", {g.z_min, g.z_max});
  g.x_min = xr[0];
  g.x_max = xr[1];
  g.y_min = yr[0];
  g.y_max = yr[1];
  g.z_min = zr[0];
  g.z_max = zr[1];
  const auto vox = kv.get_doubles(prefix + "voxel", {g.vx, g.vy, g.vz});
  if (vox.size() != 3) {
    throw InvalidArgument("config key '" + prefix + "voxel' needs three values");
  }
  g.vx = vox[0];
  g.vy = vox[1];
  g.vz = vox[2];
  g.downsample = static_cast<int>(kv.get_int(prefix + "downsample", g.downsample));
  g.voxel_cap = static_cast<int>(kv.get_int(prefix + "voxel_cap", g.voxel_cap));
  g.validate();
  return g;
}

std::size_t VoxelGrid::retained_points() const {
  std::size_t n = 0;
  for (const auto& [idx, f] : occupied) {
    n += static_cast<std::size_t>(f.count);
  }
  return n;
}

VoxelGrid voxelize_mean(const PointCloud& cloud, const GridConfig& config) {
  config.validate();
  VoxelGrid grid;
  grid.config = config;
  const auto nx = static_cast<std::int32_t>(config.x_cells());
  const auto ny = static_cast<std::int32_t>(config.y_cells());
  const auto nz = static_cast<std::int32_t>(config.z_cells());
  for (const auto& p : cloud.points) {
    if (!(p.x >= config.x_min && p.x < config.x_max && p.y >= config.y_min &&
          p.y < config.y_max && p.z >= config.z_min && p.z < config.z_max)) {
      ++grid.dropped_out_of_range;
      continue;
    }
    VoxelIndex idx{static_cast<std::int32_t>(std::floor((p.x - config.x_min) / config.vx)),
                   static_cast<std::int32_t>(std::floor((p.y - config.y_min) / config.vy)),
                   static_cast<std::int32_t>(std::floor((p.z - config.z_min) / config.vz))};
    // Division can round up to the exclusive edge.
    idx.ix = std::min(idx.ix, nx - 1);
    idx.iy = std::min(idx.iy, ny - 1);
    idx.iz = std::min(idx.iz, nz - 1);
    auto& f = grid.occupied[idx];
    if (f.count >= config.voxel_cap) {
      ++grid.dropped_over_cap;
      continue;
    }
    // Running sums; converted to means below.
    f.x += p.x;
    f.y += p.y;
    f.z += p.z;
    f.intensity += p.intensity;
    ++f.count;
  }
  for (auto& [idx, f] : grid.occupied) {
    const double n = f.count;
    f.x /= n;
    f.y /= n;
    f.z /= n;
    f.intensity /= n;
  }
  return grid;
}

Grid2D bev_collapse(const VoxelGrid& grid, int stride) {
  const auto& cfg = grid.config;
  const int r = stride == 0 ? cfg.downsample : stride;
  if (r < 1 || cfg.x_cells() % static_cast<std::size_t>(r) != 0 ||
      cfg.y_cells() % static_cast<std::size_t>(r) != 0) {
    throw InvalidArgument("bev_collapse: stride must divide the x/y cell counts");
  }
  const std::size_t rows = cfg.x_cells() / static_cast<std::size_t>(r);
  const std::size_t cols = cfg.y_cells() / static_cast<std::size_t>(r);
  const double norm = static_cast<double>(r) * r * static_cast<double>(cfg.z_cells());

  Grid2D out(rows, cols, kBevChannels);
  Grid2D points(rows, cols, 1);
  Grid2D max_z(rows, cols, 1, -std::numeric_limits<double>::infinity());
  for (const auto& [idx, f] : grid.occupied) {
    const auto row = static_cast<std::size_t>(idx.ix / r);
    const auto col = static_cast<std::size_t>(idx.iy / r);
    out.at(row, col, 0) += 1.0;
    out.at(row, col, 1) += f.z * f.count;
    out.at(row, col, 2) += f.intensity * f.count;
    points.at(row, col) += f.count;
    const double zc = cfg.z_min + (idx.iz + 0.5) * cfg.vz;
    max_z.at(row, col) = std::max(max_z.at(row, col), zc);
  }
  for (std::size_t row = 0; row < rows; ++row) {
    for (std::size_t col = 0; col < cols; ++col) {
      const double n = points.at(row, col);
      if (n == 0.0) {
        continue;
      }
      out.at(row, col, 0) /= norm;
      out.at(row, col, 1) /= n;
      out.at(row, col, 2) /= n;
      out.at(row, col, 3) = max_z.at(row, col);
    }
  }
  return out;
}

}  // namespace cn3d
