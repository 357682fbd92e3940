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

#include "cn3d/pointcloud_io.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cn3d/error.hpp"
#include "cn3d/grid_io.hpp"

namespace cn3d {

namespace {

constexpr std::size_t kRecordBytes = 16;

ClassSizeSpec default_class_sizes(const std::string& name) {
  if (name == "Pedestrian") {
    return {name, {0.6, 1.0}, {0.5, 0.8}, {1.5, 1.9}};
  }
  if (name == "Cyclist") {
    return {name, {1.5, 1.9}, {0.5, 0.8}, {1.5, 1.9}};
  }
  return {name, {3.6, 4.4}, {1.6, 1.9}, {1.4, 1.7}};
}

std::array<double, 2> get_range(const KeyValues& kv, const std::string& key,
                                std::array<double, 2> fallback) {
  const auto v = kv.get_doubles(key, {fallback[0], fallback[1]});
  if (v.size() != 2) {
    throw InvalidArgument("scene spec key '" + key + "' needs two values");
  }
  return {v[0], v[1]};
}

Box3D inflate(const Box3D& b, double margin) {
  Box3D out = b;
  out.l += 2.0 * margin;
  out.w += 2.0 * margin;
  return out;
}

}  // namespace

void check_scene(const LabeledScene& scene) {
  if (scene.boxes.size() != scene.classes.size()) {
    throw InvalidArgument("LabeledScene: " + std::to_string(scene.boxes.size()) + " boxes but " +
                          std::to_string(scene.classes.size()) + " classes");
  }
  for (const auto& b : scene.boxes) {
    check_box(b);
  }
  for (const auto& p : scene.cloud.points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z) ||
        !std::isfinite(p.intensity)) {
      throw InvalidArgument("PointCloud: non-finite coordinate");
    }
  }
}

PointCloud read_kitti_bin(std::span<const char> bytes) {
  if (bytes.size() % kRecordBytes != 0) {
    const std::size_t offset = bytes.size() - bytes.size() % kRecordBytes;
    throw ParseError("velodyne blob: truncated record at byte offset " + std::to_string(offset));
  }
  const auto values = decode_f32_le(bytes);
  PointCloud cloud;
  cloud.points.reserve(values.size() / 4);
  for (std::size_t i = 0; i + 3 < values.size(); i += 4) {
    cloud.points.push_back({values[i], values[i + 1], values[i + 2], values[i + 3]});
  }
  return cloud;
}

std::vector<char> write_kitti_bin(const PointCloud& cloud) {
  std::vector<double> flat;
  flat.reserve(cloud.points.size() * 4);
  for (const auto& p : cloud.points) {
    flat.insert(flat.end(), {p.x, p.y, p.z, p.intensity});
  }
  std::vector<char> out;
  append_f32_le(out, flat);
  return out;
}

PointCloud load_kitti_bin(const std::filesystem::path& path) {
  try {
    return read_kitti_bin(read_file_bytes(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void save_kitti_bin(const std::filesystem::path& path, const PointCloud& cloud) {
  write_file_bytes(path, write_kitti_bin(cloud));
}

std::vector<LabelRecord> parse_labels(const std::string& text, bool allow_confidence) {
  std::vector<LabelRecord> out;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line.resize(hash);
    }
    std::istringstream ls(line);
    std::vector<std::string> fields;
    std::string tok;
    while (ls >> tok) {
      fields.push_back(tok);
    }
    if (fields.empty()) {
      continue;
    }
    const bool with_conf = allow_confidence && fields.size() == 9;
    if (fields.size() != 8 && !with_conf) {
      throw ParseError("label line " + std::to_string(lineno) + ": expected " +
                       (allow_confidence ? "8 or 9" : "8") + " fields, got " +
                       std::to_string(fields.size()));
    }
    std::array<double, 8> v{};
    for (std::size_t i = 1; i < fields.size(); ++i) {
      try {
        std::size_t used = 0;
        v[i - 1] = std::stod(fields[i], &used);
        if (used != fields[i].size() || !std::isfinite(v[i - 1])) {
          throw std::invalid_argument(fields[i]);
        }
      } catch (const std::exception&) {
        throw ParseError("label line " + std::to_string(lineno) + ": bad number '" + fields[i] +
                         "'");
      }
    }
    LabelRecord rec;
    rec.cls = fields[0];
    try {
      rec.box = make_box(v[0], v[1], v[2], v[3], v[4], v[5], v[6]);
    } catch (const InvalidArgument& e) {
      throw ParseError("label line " + std::to_string(lineno) + ": " + e.what());
    }
    if (with_conf) {
      rec.confidence = v[7];
    }
    out.push_back(rec);
  }
  return out;
}

std::string format_labels(std::span<const LabelRecord> records) {
  std::ostringstream os;
  os.precision(17);
  for (const auto& r : records) {
    const auto& b = r.box;
    os << r.cls << ' ' << b.cx << ' ' << b.cy << ' ' << b.cz << ' ' << b.l << ' ' << b.w << ' '
       << b.h << ' ' << b.yaw;
    if (r.confidence) {
      os << ' ' << *r.confidence;
    }
    os << '\n';
  }
  return os.str();
}

LabeledScene labels_to_scene(std::span<const LabelRecord> records, const ClassNames& names,
                             bool skip_unknown) {
  LabeledScene scene;
  for (const auto& r : records) {
    const auto it = std::find(names.begin(), names.end(), r.cls);
    if (it == names.end()) {
      if (skip_unknown) {
        continue;
      }
      throw InvalidArgument("unknown class '" + r.cls + "'");
    }
    scene.boxes.push_back(r.box);
    scene.classes.push_back(static_cast<int>(it - names.begin()));
  }
  return scene;
}

KittiCalib parse_kitti_calib(const std::string& text) {
  KittiCalib calib;
  bool have_r0 = false;
  bool have_tr = false;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) {
      continue;
    }
    if (key == "R0_rect:" || key == "R_rect") {
      for (auto& v : calib.r0_rect) {
        ls >> v;
      }
      have_r0 = static_cast<bool>(ls);
    } else if (key == "Tr_velo_to_cam:" || key == "Tr_velo_cam") {
      for (auto& v : calib.velo_to_cam) {
        ls >> v;
      }
      have_tr = static_cast<bool>(ls);
    }
  }
  if (!have_r0 || !have_tr) {
    throw ParseError("calib: missing R0_rect or Tr_velo_to_cam");
  }
  return calib;
}

std::vector<LabelRecord> convert_kitti_camera_labels(const std::string& label_text,
                                                     const KittiCalib& calib) {
  const auto& r0 = calib.r0_rect;
  const auto& tr = calib.velo_to_cam;
  // R0 is a rotation, so its inverse is its transpose; likewise the 3x3 block of Tr.
  auto rect_to_velo = [&](const Vec3& p) {
    const Vec3 cam{r0[0] * p.x + r0[3] * p.y + r0[6] * p.z,
                   r0[1] * p.x + r0[4] * p.y + r0[7] * p.z,
                   r0[2] * p.x + r0[5] * p.y + r0[8] * p.z};
    const Vec3 d{cam.x - tr[3], cam.y - tr[7], cam.z - tr[11]};
    return Vec3{tr[0] * d.x + tr[4] * d.y + tr[8] * d.z, tr[1] * d.x + tr[5] * d.y + tr[9] * d.z,
                tr[2] * d.x + tr[6] * d.y + tr[10] * d.z};
  };

  std::vector<LabelRecord> out;
  std::istringstream is(label_text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string type;
    if (!(ls >> type) || type == "DontCare") {
      continue;
    }
    std::array<double, 14> f{};
    for (auto& v : f) {
      if (!(ls >> v)) {
        throw ParseError("KITTI label line " + std::to_string(lineno) + ": expected 15 fields");
      }
    }
    // truncated occluded alpha x1 y1 x2 y2 h w l x y z ry
    const double h = f[7], w = f[8], l = f[9];
    const Vec3 bottom{f[10], f[11], f[12]};
    const double ry = f[13];
    const Vec3 center = rect_to_velo({bottom.x, bottom.y - 0.5 * h, bottom.z});
    LabelRecord rec;
    rec.cls = type;
    try {
      rec.box = make_box(center.x, center.y, center.z, l, w, h, -ry - 0.5 * kPi);
    } catch (const InvalidArgument& e) {
      throw ParseError("KITTI label line " + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(rec);
  }
  return out;
}

ClassNames SceneSpec::class_names() const {
  ClassNames names;
  for (const auto& c : classes) {
    names.push_back(c.name);
  }
  return names;
}

void SceneSpec::validate() const {
  auto fail = [](const std::string& msg) { throw InvalidArgument("scene spec: " + msg); };
  if (classes.empty() && boxes_max > 0) {
    fail("no classes");
  }
  if (boxes_min < 0 || boxes_max < boxes_min) {
    fail("need 0 <= boxes_min <= boxes_max");
  }
  if (points_min < 0 || points_max < points_min) {
    fail("need 0 <= points_min <= points_max");
  }
  if (!(x_range[0] < x_range[1]) || !(y_range[0] < y_range[1]) ||
      !(yaw_range[0] <= yaw_range[1])) {
    fail("empty range");
  }
  for (const auto& c : classes) {
    for (const auto* r : {&c.length, &c.width, &c.height}) {
      // Faces must sit more than 0.2 m from the center after jitter.
      if (!((*r)[0] >= 0.5 && (*r)[0] <= (*r)[1])) {
        fail("class " + c.name + ": sizes must satisfy 0.5 <= lo <= hi");
      }
    }
  }
  if (clutter_density < 0.0 || jitter < 0.0 || jitter > 0.01 || min_gap < 0.0 ||
      edge_margin < 0.0 || sensor_clearance < 0.0 || max_retries < 1 || intensity_noise < 0.0) {
    fail("invalid scalar parameter");
  }
}

SceneSpec scene_spec_from_kv(const KeyValues& parent, const std::string& prefix) {
  const KeyValues kv = parent.with_prefix(prefix);
  SceneSpec s;
  const auto names = kv.get_list("classes", {"Car"});
  s.classes.clear();
  for (const auto& n : names) {
    ClassSizeSpec c = default_class_sizes(n);
    c.length = get_range(kv, n + ".length", c.length);
    c.width = get_range(kv, n + ".width", c.width);
    c.height = get_range(kv, n + ".height", c.height);
    s.classes.push_back(c);
  }
  s.boxes_min = static_cast<int>(kv.get_int("boxes_min", s.boxes_min));
  s.boxes_max = static_cast<int>(kv.get_int("boxes_max", s.boxes_max));
  s.x_range = get_range(kv, "x_range", s.x_range);
  s.y_range = get_range(kv, "y_range", s.y_range);
  s.yaw_range = get_range(kv, "yaw_range", s.yaw_range);
  s.ground_z = kv.get_double("ground_z", s.ground_z);
  s.points_min = static_cast<int>(kv.get_int("points_min", s.points_min));
  s.points_max = static_cast<int>(kv.get_int("points_max", s.points_max));
  s.clutter_density = kv.get_double("clutter_density", s.clutter_density);
  s.edge_margin = kv.get_double("edge_margin", s.edge_margin);
  s.min_gap = kv.get_double("min_gap", s.min_gap);
  s.sensor_clearance = kv.get_double("sensor_clearance", s.sensor_clearance);
  s.max_retries = static_cast<int>(kv.get_int("max_retries", s.max_retries));
  s.jitter = kv.get_double("jitter", s.jitter);
  s.intensity_noise = kv.get_double("intensity_noise", s.intensity_noise);
  kv.reject_unknown("scene spec");
  for (const auto& [k, v] : kv.entries()) {
    parent.touch(prefix + k);
  }
  s.validate();
  return s;
}

LabeledScene synth_scene(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  LabeledScene scene;

  const auto n_boxes = rng.uniform_int(spec.boxes_min, spec.boxes_max);
  for (std::int64_t i = 0; i < n_boxes; ++i) {
    const auto cls = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(spec.classes.size()) - 1));
    const auto& cs = spec.classes[static_cast<std::size_t>(cls)];
    const double l = rng.uniform(cs.length[0], cs.length[1]);
    const double w = rng.uniform(cs.width[0], cs.width[1]);
    const double h = rng.uniform(cs.height[0], cs.height[1]);
    const double yaw = rng.uniform(spec.yaw_range[0], spec.yaw_range[1]);
    bool placed = false;
    for (int attempt = 0; attempt < spec.max_retries && !placed; ++attempt) {
      const double cx = rng.uniform(spec.x_range[0], spec.x_range[1]);
      const double cy = rng.uniform(spec.y_range[0], spec.y_range[1]);
      const Box3D box = make_box(cx, cy, spec.ground_z + 0.5 * h, l, w, h, yaw);
      bool ok = true;
      for (const auto& c : bev_corners(box)) {
        ok = ok && c.x >= spec.x_range[0] + spec.edge_margin &&
             c.x < spec.x_range[1] - spec.edge_margin && c.y >= spec.y_range[0] + spec.edge_margin &&
             c.y < spec.y_range[1] - spec.edge_margin;
      }
      const Box3D guard = inflate(box, spec.sensor_clearance);
      ok = ok && !point_in_box(guard, {0.0, 0.0, box.cz});
      for (const auto& other : scene.boxes) {
        if (!ok) {
          break;
        }
        ok = bev_intersection_area(inflate(box, 0.5 * spec.min_gap),
                                   inflate(other, 0.5 * spec.min_gap)) == 0.0;
      }
      if (ok) {
        scene.boxes.push_back(box);
        scene.classes.push_back(cls);
        placed = true;
      }
    }
    if (!placed) {
      throw PlacementError("synth_scene: could not place box " + std::to_string(i) + " of " +
                           std::to_string(n_boxes) + " after " +
                           std::to_string(spec.max_retries) + " attempts");
    }
  }

  for (const auto& box : scene.boxes) {
    const double c = std::cos(box.yaw);
    const double s = std::sin(box.yaw);
    // Side faces: outward normal in the local frame, half extents of the face.
    struct Face {
      double nx, ny;  // local outward normal
      double area;
      double dist;    // normal . (face center - sensor)
    };
    std::array<Face, 4> sides{{{1, 0, box.w * box.h, 0},
                               {-1, 0, box.w * box.h, 0},
                               {0, 1, box.l * box.h, 0},
                               {0, -1, box.l * box.h, 0}}};
    for (auto& f : sides) {
      const double lx = f.nx * 0.5 * box.l;
      const double ly = f.ny * 0.5 * box.w;
      const double fx = box.cx + c * lx - s * ly;
      const double fy = box.cy + s * lx + c * ly;
      const double wnx = c * f.nx - s * f.ny;
      const double wny = s * f.nx + c * f.ny;
      f.dist = wnx * fx + wny * fy;
    }
    std::sort(sides.begin(), sides.end(), [](const Face& a, const Face& b) { return a.dist < b.dist; });
    const Face& f0 = sides[0];
    const Face& f1 = sides[1];
    const double top_area = box.l * box.w;
    const double total = f0.area + f1.area + top_area;

    const auto n_points = rng.uniform_int(spec.points_min, spec.points_max);
    for (std::int64_t k = 0; k < n_points; ++k) {
      const double pick = rng.uniform() * total;
      double lx, ly, lz;
      const double ru = rng.uniform(-0.5, 0.5);
      const double rv = rng.uniform(-0.5, 0.5);
      if (pick < top_area) {
        lx = ru * box.l;
        ly = rv * box.w;
        lz = 0.5 * box.h;
      } else {
        const Face& f = pick < top_area + f0.area ? f0 : f1;
        lz = rv * box.h;
        if (f.nx != 0.0) {
          lx = f.nx * 0.5 * box.l;
          ly = ru * box.w;
        } else {
          lx = ru * box.l;
          ly = f.ny * 0.5 * box.w;
        }
      }
      Point p;
      p.x = box.cx + c * lx - s * ly + rng.uniform(-spec.jitter, spec.jitter);
      p.y = box.cy + s * lx + c * ly + rng.uniform(-spec.jitter, spec.jitter);
      p.z = box.cz + lz + rng.uniform(-spec.jitter, spec.jitter);
      // Brighter toward the front, which makes the heading observable.
      const double along = std::clamp(lx / (0.5 * box.l), -1.0, 1.0);
      p.intensity = std::clamp(
          0.5 + 0.4 * along + rng.uniform(-spec.intensity_noise, spec.intensity_noise), 0.0, 1.0);
      scene.cloud.points.push_back(p);
    }
  }

  const double area = (spec.x_range[1] - spec.x_range[0]) * (spec.y_range[1] - spec.y_range[0]);
  const auto n_clutter = static_cast<std::int64_t>(std::llround(spec.clutter_density * area));
  for (std::int64_t k = 0; k < n_clutter; ++k) {
    Point p;
    p.x = rng.uniform(spec.x_range[0], spec.x_range[1]);
    p.y = rng.uniform(spec.y_range[0], spec.y_range[1]);
    p.z = spec.ground_z - 0.05 + rng.uniform(-0.02, 0.02);
    p.intensity = rng.uniform(0.0, 0.3);
    scene.cloud.points.push_back(p);
  }
  return scene;
}

AugmentParams AugmentParams::inverse() const {
  // flip then R(t): undone by flip then R(t) again, since F R(t) F = R(-t).
  return {flip, flip ? rotation : -rotation, 1.0 / scale};
}

LabeledScene augment_global(const LabeledScene& scene, const AugmentParams& params) {
  if (!(params.scale > 0.0) || !std::isfinite(params.rotation)) {
    throw InvalidArgument("augment_global: scale must be positive and rotation finite");
  }
  const double c = std::cos(params.rotation);
  const double s = std::sin(params.rotation);
  const double k = params.scale;
  auto map_xy = [&](double& x, double& y) {
    if (params.flip) {
      y = -y;
    }
    const double rx = c * x - s * y;
    const double ry = s * x + c * y;
    x = k * rx;
    y = k * ry;
  };

  LabeledScene out = scene;
  for (auto& p : out.cloud.points) {
    map_xy(p.x, p.y);
    p.z *= k;
  }
  for (auto& b : out.boxes) {
    map_xy(b.cx, b.cy);
    b.cz *= k;
    b.l *= k;
    b.w *= k;
    b.h *= k;
    b.yaw = wrap_angle((params.flip ? -b.yaw : b.yaw) + params.rotation);
  }
  return out;
}

AugmentParams sample_augment(Rng& rng) {
  AugmentParams p;
  p.flip = rng.bernoulli(0.5);
  p.rotation = rng.uniform(-0.25 * kPi, 0.25 * kPi);
  p.scale = rng.uniform(0.95, 1.05);
  return p;
}

}  // namespace cn3d
