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

#include "cn3d/geom.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cn3d/error.hpp"

namespace cn3d {

namespace {

constexpr double kAreaEps = 1e-12;

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double signed_area(std::span<const Vec2> poly) {
  double s = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    s += p.x * q.y - q.x * p.y;
  }
  return 0.5 * s;
}

Vec2 segment_line_intersection(const Vec2& p, const Vec2& q, const Vec2& a, const Vec2& b) {
  // Line through a-b; p and q lie on opposite sides.
  const double dp = cross(a, b, p);
  const double dq = cross(a, b, q);
  const double t = dp / (dp - dq);
  return {p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
}

}  // namespace

double wrap_angle(double r) {
  if (!std::isfinite(r)) {
    throw InvalidArgument("wrap_angle: non-finite angle");
  }
  double w = std::fmod(r, 2.0 * kPi);
  if (w <= -kPi) {
    w += 2.0 * kPi;
  } else if (w > kPi) {
    w -= 2.0 * kPi;
  }
  return w;
}

void check_box(const Box3D& b) {
  const bool finite = std::isfinite(b.cx) && std::isfinite(b.cy) && std::isfinite(b.cz) &&
                      std::isfinite(b.l) && std::isfinite(b.w) && std::isfinite(b.h) &&
                      std::isfinite(b.yaw);
  if (!finite) {
    throw InvalidArgument("Box3D: non-finite field");
  }
  if (!(b.l > 0.0 && b.w > 0.0 && b.h > 0.0)) {
    throw InvalidArgument("Box3D: sizes must be positive (l=" + std::to_string(b.l) +
                          ", w=" + std::to_string(b.w) + ", h=" + std::to_string(b.h) + ")");
  }
  if (!(b.yaw > -kPi && b.yaw <= kPi)) {
    throw InvalidArgument("Box3D: yaw " + std::to_string(b.yaw) + " outside (-pi, pi]");
  }
}

Box3D make_box(double cx, double cy, double cz, double l, double w, double h, double yaw) {
  Box3D b{cx, cy, cz, l, w, h, 0.0};
  b.yaw = std::isfinite(yaw) ? wrap_angle(yaw) : yaw;
  check_box(b);
  return b;
}

std::array<Vec2, 4> bev_corners(const Box3D& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double hl = 0.5 * box.l;
  const double hw = 0.5 * box.w;
  // Local (along, across) offsets in canonical order.
  constexpr std::array<std::array<double, 2>, 4> kSigns{{{1, 1}, {1, -1}, {-1, -1}, {-1, 1}}};
  std::array<Vec2, 4> out;
  for (std::size_t k = 0; k < 4; ++k) {
    const double lx = kSigns[k][0] * hl;
    const double ly = kSigns[k][1] * hw;
    out[k] = {box.cx + c * lx - s * ly, box.cy + s * lx + c * ly};
  }
  return out;
}

std::array<Vec3, 8> corners_3d(const Box3D& box) {
  check_box(box);
  const auto bev = bev_corners(box);
  const double z0 = box.cz - 0.5 * box.h;
  const double z1 = box.cz + 0.5 * box.h;
  std::array<Vec3, 8> out;
  for (std::size_t k = 0; k < 4; ++k) {
    out[k] = {bev[k].x, bev[k].y, z0};
    out[k + 4] = {bev[k].x, bev[k].y, z1};
  }
  return out;
}

Box3D box_from_corners(const std::array<Vec3, 8>& c) {
  Box3D b;
  for (const auto& p : c) {
    b.cx += p.x / 8.0;
    b.cy += p.y / 8.0;
    b.cz += p.z / 8.0;
  }
  // Front-left minus rear-left points along the heading.
  const double ax = c[0].x - c[3].x;
  const double ay = c[0].y - c[3].y;
  b.l = std::hypot(ax, ay);
  b.w = std::hypot(c[0].x - c[1].x, c[0].y - c[1].y);
  b.h = c[4].z - c[0].z;
  b.yaw = wrap_angle(std::atan2(ay, ax));
  return b;
}

double polygon_area(std::span<const Vec2> poly) {
  if (poly.size() < 3) {
    return 0.0;
  }
  return std::abs(signed_area(poly));
}

std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip) {
  std::vector<Vec2> out(subject.begin(), subject.end());
  if (clip.size() < 3) {
    return {};
  }
  // Inside means on the left of each clip edge for a counter-clockwise clip polygon.
  const double orient = signed_area(clip) >= 0.0 ? 1.0 : -1.0;
  for (std::size_t e = 0; e < clip.size() && !out.empty(); ++e) {
    const Vec2& a = clip[e];
    const Vec2& b = clip[(e + 1) % clip.size()];
    std::vector<Vec2> input;
    input.swap(out);
    for (std::size_t i = 0; i < input.size(); ++i) {
      const Vec2& cur = input[i];
      const Vec2& prev = input[(i + input.size() - 1) % input.size()];
      const bool cur_in = orient * cross(a, b, cur) >= 0.0;
      const bool prev_in = orient * cross(a, b, prev) >= 0.0;
      if (cur_in) {
        if (!prev_in) {
          out.push_back(segment_line_intersection(prev, cur, a, b));
        }
        out.push_back(cur);
      } else if (prev_in) {
        out.push_back(segment_line_intersection(prev, cur, a, b));
      }
    }
  }
  return out;
}

double bev_intersection_area(const Box3D& a, const Box3D& b) {
  const auto pa = bev_corners(a);
  const auto pb = bev_corners(b);
  const auto inter = clip_convex(pa, pb);
  const double area = polygon_area(inter);
  return area < kAreaEps ? 0.0 : area;
}

double rotated_iou_bev(const Box3D& a, const Box3D& b) {
  check_box(a);
  check_box(b);
  const double inter = bev_intersection_area(a, b);
  if (inter <= 0.0) {
    return 0.0;
  }
  const double uni = a.l * a.w + b.l * b.w - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_3d(const Box3D& a, const Box3D& b) {
  check_box(a);
  check_box(b);
  const double z_lo = std::max(a.cz - 0.5 * a.h, b.cz - 0.5 * b.h);
  const double z_hi = std::min(a.cz + 0.5 * a.h, b.cz + 0.5 * b.h);
  if (z_hi <= z_lo) {
    return 0.0;
  }
  const double area = bev_intersection_area(a, b);
  const double inter = area * (z_hi - z_lo);
  if (inter <= 0.0) {
    return 0.0;
  }
  const double uni = a.l * a.w * a.h + b.l * b.w * b.h - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

bool point_in_box(const Box3D& box, const Vec3& p) {
  const double dx = p.x - box.cx;
  const double dy = p.y - box.cy;
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double along = c * dx + s * dy;
  const double across = -s * dx + c * dy;
  return std::abs(along) <= 0.5 * box.l && std::abs(across) <= 0.5 * box.w &&
         std::abs(p.z - box.cz) <= 0.5 * box.h;
}

Grid2D::Grid2D(std::size_t height, std::size_t width, std::size_t channels, double fill)
    : height_(height), width_(width), channels_(channels),
      data_(height * width * channels, fill) {}

Grid2D::Grid2D(std::size_t height, std::size_t width, std::size_t channels,
               std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  if (data_.size() != height * width * channels) {
    throw InvalidArgument("Grid2D: data length " + std::to_string(data_.size()) +
                          " != " + std::to_string(height * width * channels));
  }
}

Grid2D Grid2D::channel(std::size_t ch) const {
  if (ch >= channels_) {
    throw InvalidArgument("Grid2D::channel: index out of range");
  }
  Grid2D out(height_, width_, 1);
  for (std::size_t i = 0; i < height_ * width_; ++i) {
    out.data_[i] = data_[i * channels_ + ch];
  }
  return out;
}

void Grid2D::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

double bilinear_sample(const Grid2D& map, double u, double v, std::size_t ch) {
  const double fu = std::floor(u);
  const double fv = std::floor(v);
  const auto h = static_cast<double>(map.height());
  const auto w = static_cast<double>(map.width());
  double acc = 0.0;
  for (int dj = 0; dj < 2; ++dj) {
    const double row = fv + dj;
    if (row < 0.0 || row >= h) {
      continue;
    }
    for (int di = 0; di < 2; ++di) {
      const double col = fu + di;
      if (col < 0.0 || col >= w) {
        continue;
      }
      const double k = bilinear_kernel(col, row, u, v);
      if (k != 0.0) {
        acc += k * map.at(static_cast<std::size_t>(row), static_cast<std::size_t>(col), ch);
      }
    }
  }
  return acc;
}

}  // namespace cn3d
