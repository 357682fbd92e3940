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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "cn3d/error.hpp"
#include "cn3d/evalkit.hpp"
#include "cn3d/infer.hpp"
#include "cn3d/losses.hpp"
#include "cn3d/pipeline.hpp"
#include "cn3d/targets.hpp"

namespace py = pybind11;
using namespace cn3d;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Overrides = py::dict;

// Values may be strings, numbers, booleans or sequences of numbers.
std::string config_value(const py::handle& v) {
  if (py::isinstance<py::bool_>(v)) {
    return v.cast<bool>() ? "true" : "false";
  }
  if (py::isinstance<py::str>(v)) {
    return v.cast<std::string>();
  }
  if (py::isinstance<py::sequence>(v)) {
    std::string out;
    for (const auto& item : v.cast<py::sequence>()) {
      out += (out.empty() ? "" : " ") + config_value(item);
    }
    return out;
  }
  return py::str(v).cast<std::string>();
}

RunConfig make_config(const Overrides& overrides) {
  KeyValues kv;
  for (const auto& [k, v] : overrides) {
    kv.set(k.cast<std::string>(), config_value(v));
  }
  return run_config_from_kv(kv);
}

Box3D box_from(const std::vector<double>& v) {
  if (v.size() != 7) {
    throw InvalidArgument("box: expected 7 values (cx, cy, cz, l, w, h, yaw)");
  }
  return make_box(v[0], v[1], v[2], v[3], v[4], v[5], v[6]);
}

std::vector<Box3D> boxes_from(const Array& a) {
  if (a.size() == 0) {
    return {};
  }
  if (a.ndim() != 2 || a.shape(1) != 7) {
    throw InvalidArgument("boxes: expected an (N, 7) array");
  }
  auto r = a.unchecked<2>();
  std::vector<Box3D> out;
  for (py::ssize_t i = 0; i < r.shape(0); ++i) {
    out.push_back(make_box(r(i, 0), r(i, 1), r(i, 2), r(i, 3), r(i, 4), r(i, 5), r(i, 6)));
  }
  return out;
}

Array boxes_to(const std::vector<Box3D>& boxes) {
  Array out({static_cast<py::ssize_t>(boxes.size()), py::ssize_t{7}});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const Box3D& b = boxes[i];
    const double v[7] = {b.cx, b.cy, b.cz, b.l, b.w, b.h, b.yaw};
    for (py::ssize_t k = 0; k < 7; ++k) {
      w(static_cast<py::ssize_t>(i), k) = v[k];
    }
  }
  return out;
}

Grid2D grid_from(const Array& a) {
  if (a.ndim() != 3) {
    throw InvalidArgument("map: expected an (H, W, C) array");
  }
  std::vector<double> data(a.data(), a.data() + a.size());
  return Grid2D(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                static_cast<std::size_t>(a.shape(2)), std::move(data));
}

Array grid_to(const Grid2D& g) {
  Array out({g.height(), g.width(), g.channels()});
  std::copy(g.data().begin(), g.data().end(), out.mutable_data());
  return out;
}

PointCloud cloud_from(const Array& a) {
  PointCloud c;
  if (a.size() == 0) {
    return c;
  }
  if (a.ndim() != 2 || a.shape(1) != 4) {
    throw InvalidArgument("points: expected an (N, 4) array of x, y, z, intensity");
  }
  auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < r.shape(0); ++i) {
    c.points.push_back({r(i, 0), r(i, 1), r(i, 2), r(i, 3)});
  }
  return c;
}

Array cloud_to(const PointCloud& c) {
  Array out({static_cast<py::ssize_t>(c.points.size()), py::ssize_t{4}});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    const auto& p = c.points[i];
    const auto row = static_cast<py::ssize_t>(i);
    w(row, 0) = p.x;
    w(row, 1) = p.y;
    w(row, 2) = p.z;
    w(row, 3) = p.intensity;
  }
  return out;
}

py::dict maps_to(const HeadMaps& m) {
  py::dict d;
  d["center"] = grid_to(m.center);
  d["corner"] = grid_to(m.corner);
  d["offset"] = grid_to(m.offset);
  d["z"] = grid_to(m.z);
  d["size"] = grid_to(m.size);
  d["direction"] = grid_to(m.direction);
  return d;
}

HeadMaps maps_from(const py::dict& d) {
  auto get = [&](const char* k) { return grid_from(d[k].cast<Array>()); };
  HeadMaps m{get("center"), get("corner"), get("offset"), get("z"), get("size"), get("direction")};
  m.check();
  return m;
}

py::dict detections_to(const std::vector<Detection>& dets, const ClassNames& names) {
  std::vector<Box3D> boxes;
  std::vector<int> classes;
  std::vector<double> conf;
  std::vector<std::string> labels;
  for (const auto& d : dets) {
    boxes.push_back(d.box);
    classes.push_back(d.cls);
    conf.push_back(d.confidence);
    labels.push_back(names.at(static_cast<std::size_t>(d.cls)));
  }
  py::dict out;
  out["boxes"] = boxes_to(boxes);
  out["classes"] = classes;
  out["names"] = labels;
  out["confidences"] = conf;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Single-stage NMS-free LiDAR 3D detection core.";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);

  m.def("default_config", &default_config_text, "Documented config keys with defaults.");

  m.def("rotated_iou_bev",
        [](const std::vector<double>& a, const std::vector<double>& b) {
          return rotated_iou_bev(box_from(a), box_from(b));
        },
        py::arg("a"), py::arg("b"));
  m.def("iou_3d",
        [](const std::vector<double>& a, const std::vector<double>& b) {
          return iou_3d(box_from(a), box_from(b));
        },
        py::arg("a"), py::arg("b"));
  m.def("corners_3d",
        [](const std::vector<double>& box) {
          const auto c = corners_3d(box_from(box));
          Array out({py::ssize_t{8}, py::ssize_t{3}});
          auto w = out.mutable_unchecked<2>();
          for (py::ssize_t k = 0; k < 8; ++k) {
            w(k, 0) = c[static_cast<std::size_t>(k)].x;
            w(k, 1) = c[static_cast<std::size_t>(k)].y;
            w(k, 2) = c[static_cast<std::size_t>(k)].z;
          }
          return out;
        },
        py::arg("box"));
  m.def("bilinear_sample",
        [](const Array& map, double u, double v, std::size_t ch) {
          return bilinear_sample(grid_from(map), u, v, ch);
        },
        py::arg("map"), py::arg("u"), py::arg("v"), py::arg("ch") = 0);

  m.def("gaussian_radius", &gaussian_radius, py::arg("l_cells"), py::arg("w_cells"), py::arg("t"));
  m.def("balanced_l1",
        [](double x, double a, double gamma) {
          LossConfig cfg;
          cfg.a = a;
          cfg.gamma = gamma;
          cfg.validate();
          return balanced_l1(x, cfg);
        },
        py::arg("x"), py::arg("a") = 0.5, py::arg("gamma") = 1.5,
        "Returns (value, derivative).");
  m.def("nds", &nds, py::arg("map"), py::arg("errors"));
  m.def("ap40",
        [](const std::vector<double>& confidences, const std::vector<bool>& tp, std::size_t num_gt) {
          if (confidences.size() != tp.size()) {
            throw InvalidArgument("ap40: confidences and tp differ in length");
          }
          MatchResult r;
          r.num_gt = num_gt;
          for (std::size_t i = 0; i < tp.size(); ++i) {
            r.detections.push_back({confidences[i], tp[i]});
          }
          std::stable_sort(r.detections.begin(), r.detections.end(),
                           [](const auto& a, const auto& b) { return a.confidence > b.confidence; });
          return ap40(r);
        },
        py::arg("confidences"), py::arg("tp"), py::arg("num_gt"));

  m.def("network_input",
        [](const Array& points, const Overrides& config) {
          return grid_to(network_input(cloud_from(points), make_config(config).grid));
        },
        py::arg("points"), py::arg("config") = py::dict(),
        "BEV input planes (H, W, 4) at voxel resolution.");

  m.def("synth_scene",
        [](std::uint64_t seed, const Overrides& config) {
          const RunConfig cfg = make_config(config);
          const auto s = synth_scene(cfg.scene, seed);
          py::dict d;
          d["points"] = cloud_to(s.cloud);
          d["boxes"] = boxes_to(s.boxes);
          d["classes"] = s.classes;
          d["class_names"] = cfg.class_names();
          return d;
        },
        py::arg("seed"), py::arg("config") = py::dict());

  m.def("load_kitti_bin",
        [](const std::filesystem::path& p) { return cloud_to(load_kitti_bin(p)); }, py::arg("path"));
  m.def("save_kitti_bin",
        [](const std::filesystem::path& p, const Array& points) { save_kitti_bin(p, cloud_from(points)); },
        py::arg("path"), py::arg("points"));

  m.def("encode_targets",
        [](const Array& boxes, const std::vector<int>& classes, const Overrides& config) {
          const RunConfig cfg = make_config(config);
          const auto ts = encode_targets(boxes_from(boxes), classes, cfg.encoder());
          py::dict d = maps_to(ts.maps);
          std::vector<std::array<long, 3>> pos;
          for (const auto& p : ts.positives) {
            pos.push_back({static_cast<long>(p.row), static_cast<long>(p.col), p.cls});
          }
          d["positives"] = pos;
          d["warnings"] = ts.warnings;
          return d;
        },
        py::arg("boxes"), py::arg("classes"), py::arg("config") = py::dict(),
        "Target maps as (H, W, C) arrays plus positive cells (row, col, class).");

  m.def("kswarp",
        [](const Array& center, const Array& corner, const Array& boxes,
           const std::vector<int>& classes, const Overrides& config, bool use_corners) {
          const RunConfig cfg = make_config(config);
          const auto bs = boxes_from(boxes);
          if (bs.size() != classes.size()) {
            throw InvalidArgument("kswarp: boxes and classes differ in length");
          }
          std::vector<ClassifiedBox> cb;
          for (std::size_t i = 0; i < bs.size(); ++i) {
            cb.push_back({bs[i], classes[i], {}});
          }
          return kswarp(grid_from(center), grid_from(corner), cb, cfg.grid, use_corners);
        },
        py::arg("center"), py::arg("corner"), py::arg("boxes"), py::arg("classes"),
        py::arg("config") = py::dict(), py::arg("use_corners") = true);

  m.def("detect",
        [](const py::dict& maps, const Overrides& config) {
          const RunConfig cfg = make_config(config);
          return detections_to(detect(maps_from(maps), cfg.grid, cfg.effective_infer()).detections,
                               cfg.class_names());
        },
        py::arg("maps"), py::arg("config") = py::dict());

  m.def("synth",
        [](const std::filesystem::path& out, std::size_t count, const Overrides& config) {
          std::ostringstream log;
          cmd_synth(make_config(config), {count, out}, log);
          return log.str();
        },
        py::arg("out"), py::arg("count") = 10, py::arg("config") = py::dict());

  m.def("train_toy",
        [](std::optional<std::filesystem::path> out, std::optional<std::size_t> steps,
           const Overrides& config) {
          const RunConfig cfg = make_config(config);
          std::ostringstream log;
          TrainResult r;
          {
            py::gil_scoped_release release;
            r = cmd_train_toy(cfg, {steps, out}, log);
          }
          py::dict d;
          d["initial_loss"] = r.initial_loss;
          d["final_loss"] = r.final_loss;
          d["step_losses"] = r.step_losses;
          d["val_ap_bev"] = r.val_ap_bev;
          d["val_ap_3d"] = r.val_ap_3d;
          d["log"] = log.str();
          return d;
        },
        py::arg("out") = py::none(), py::arg("steps") = py::none(), py::arg("config") = py::dict());

  m.def("infer",
        [](const std::filesystem::path& scenes, const std::filesystem::path& out,
           std::optional<std::filesystem::path> checkpoint, bool oracle_head,
           const Overrides& config) {
          std::ostringstream log;
          return cmd_infer(make_config(config), {scenes, checkpoint, oracle_head, out}, log);
        },
        py::arg("scenes"), py::arg("out"), py::arg("checkpoint") = py::none(),
        py::arg("oracle_head") = false, py::arg("config") = py::dict(),
        "Writes one detection file per scene; returns the scene count.");

  m.def("evaluate",
        [](const std::filesystem::path& detections, const std::filesystem::path& labels,
           std::optional<std::filesystem::path> mtp, const Overrides& config) {
          const auto ev = cmd_eval(make_config(config), {detections, labels, mtp});
          py::list classes;
          for (const auto& r : ev.report) {
            py::dict c;
            c["name"] = r.name;
            c["num_gt"] = r.num_gt;
            c["num_det"] = r.num_det;
            c["ap_bev"] = r.ap_bev;
            c["ap_3d"] = r.ap_3d;
            c["defined"] = r.defined;
            classes.append(c);
          }
          py::dict d;
          d["classes"] = classes;
          d["nds"] = ev.nds ? py::cast(*ev.nds) : py::none();
          d["text"] = ev.text;
          return d;
        },
        py::arg("detections"), py::arg("labels"), py::arg("mtp") = py::none(),
        py::arg("config") = py::dict());
}
