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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>

#include "cn3d/error.hpp"
#include "cn3d/pipeline.hpp"
#include "cn3d/rng.hpp"

namespace cn3d {

namespace {

using Scalar = std::function<double()>;

struct Checker {
  const GradcheckOptions& opt;
  Rng& rng;
  std::vector<GradcheckRow>& rows;

  // Probes entries of `x` (a view into the state `f` reads) and compares the
  // central difference of f with `grad`. Probes whose forward and backward
  // one-sided differences disagree straddle a kink and are redrawn.
  void run(const std::string& name, std::span<double> x, std::span<const double> grad,
           const Scalar& f) {
    if (x.size() != grad.size() || x.empty()) {
      throw InvalidArgument("gradcheck: " + name + " has mismatched gradient size");
    }
    std::vector<std::size_t> support;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      if (grad[i] != 0.0) {
        support.push_back(i);
      }
    }
    GradcheckRow row{name, 0, 0.0, true};
    const double f0 = f();
    std::size_t attempts = 0;
    while (row.probes < opt.probes) {
      if (++attempts > 20 * opt.probes) {
        throw Error("gradcheck: " + name + " could not find smooth probe points");
      }
      // Half the probes target entries with a nonzero analytic gradient.
      const bool on_support = !support.empty() && (attempts % 2 == 0);
      const std::size_t i =
          on_support ? support[static_cast<std::size_t>(rng.uniform_int(
                           0, static_cast<std::int64_t>(support.size()) - 1))]
                     : static_cast<std::size_t>(
                           rng.uniform_int(0, static_cast<std::int64_t>(x.size()) - 1));
      const double saved = x[i];
      const double h = opt.step * std::max(1.0, std::abs(saved));
      x[i] = saved + h;
      const double fp = f();
      x[i] = saved - h;
      const double fm = f();
      x[i] = saved;
      const double fwd = (fp - f0) / h;
      const double bwd = (f0 - fm) / h;
      if (std::abs(fwd - bwd) > 1e-3 * std::max(std::abs(fwd), std::abs(bwd)) +
                                    1e-7 * (1.0 + std::abs(f0))) {
        continue;
      }
      const double numeric = (fp - fm) / (2.0 * h);
      row.worst_rel_error = std::max(row.worst_rel_error, relative_error(grad[i], numeric));
      ++row.probes;
    }
    row.pass = row.worst_rel_error < opt.tolerance;
    rows.push_back(row);
  }
};

Grid2D random_grid(Rng& rng, std::size_t h, std::size_t w, std::size_t c, double lo, double hi) {
  Grid2D g(h, w, c);
  for (double& v : g.data()) {
    v = rng.uniform(lo, hi);
  }
  return g;
}

// Projection of a map onto fixed random weights, making any layer a scalar.
struct Projection {
  Grid2D weights;
  double operator()(const Grid2D& y) const {
    double s = 0.0;
    const auto a = y.data();
    const auto b = weights.data();
    for (std::size_t i = 0; i < a.size(); ++i) {
      s += a[i] * b[i];
    }
    return s;
  }
};

std::vector<Peak> random_positives(Rng& rng, std::size_t rows, std::size_t cols, int classes,
                                   std::size_t count) {
  std::vector<Peak> out;
  std::set<std::pair<std::size_t, std::size_t>> used;
  while (out.size() < count) {
    const auto r = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(rows) - 1));
    const auto c = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(cols) - 1));
    if (used.insert({r, c}).second) {
      out.push_back({r, c, static_cast<int>(rng.uniform_int(0, classes - 1))});
    }
  }
  return out;
}

// Residual magnitude away from 0 and from the balanced-L1 branch point at 1.
double residual(Rng& rng) {
  const double mag = rng.bernoulli(0.5) ? rng.uniform(0.05, 0.9) : rng.uniform(1.1, 3.0);
  return rng.bernoulli(0.5) ? mag : -mag;
}

void check_losses(Checker& ck, Rng& rng) {
  const LossConfig cfg;

  {  // Focal loss on a heatmap with Gaussian targets.
    Grid2D target(10, 10, 2);
    const auto pos = random_positives(rng, 10, 10, 2, 4);
    for (const auto& p : pos) {
      draw_gaussian(target, static_cast<std::size_t>(p.cls), static_cast<long>(p.row),
                    static_cast<long>(p.col), 1.2);
    }
    Grid2D pred = random_grid(rng, 10, 10, 2, 0.05, 0.95);
    const auto grad = focal_heatmap_loss(pred, target, cfg.alpha, cfg.beta, pos.size()).grad;
    ck.run("focal_heatmap_loss", pred.data(), grad.data(), [&] {
      return focal_heatmap_loss(pred, target, cfg.alpha, cfg.beta, pos.size()).value;
    });
  }

  {  // Masked L1 and masked balanced L1.
    const auto pos = random_positives(rng, 8, 8, 1, 12);
    Grid2D target = random_grid(rng, 8, 8, 3, -2.0, 2.0);
    Grid2D pred = random_grid(rng, 8, 8, 3, -2.0, 2.0);
    for (const auto& p : pos) {
      for (std::size_t ch = 0; ch < 3; ++ch) {
        pred.at(p.row, p.col, ch) = target.at(p.row, p.col, ch) + residual(rng);
      }
    }
    const auto g1 = masked_l1_loss(pred, target, pos, pos.size()).grad;
    ck.run("masked_l1_loss", pred.data(), g1.data(),
           [&] { return masked_l1_loss(pred, target, pos, pos.size()).value; });
    const auto g2 = masked_balanced_loss(pred, target, pos, pos.size(), cfg).grad;
    ck.run("masked_balanced_l1_loss", pred.data(), g2.data(),
           [&] { return masked_balanced_loss(pred, target, pos, pos.size(), cfg).value; });
  }

  {  // Scalar balanced L1 on both branches.
    std::vector<double> xs(64);
    for (double& x : xs) {
      x = residual(rng);
    }
    std::vector<double> grads(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      grads[i] = balanced_l1(xs[i], cfg).second;
    }
    std::vector<double> w(xs.size());
    for (double& v : w) {
      v = rng.uniform(0.5, 1.5);
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
      grads[i] *= w[i];
    }
    ck.run("balanced_l1", xs, grads, [&] {
      double s = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        s += w[i] * balanced_l1(xs[i], cfg).first;
      }
      return s;
    });
  }

  {  // Decode loss with respect to each regression map.
    GridConfig grid;
    grid.x_min = 0.0;
    grid.x_max = 12.8;
    grid.y_min = -6.4;
    grid.y_max = 6.4;
    grid.vx = grid.vy = 0.2;
    const std::size_t rows = grid.feature_rows();
    const std::size_t cols = grid.feature_cols();
    const auto pos = random_positives(rng, rows, cols, 1, 10);
    std::vector<std::array<Vec3, 8>> gt;
    HeadMaps pred = HeadMaps::zeros(rows, cols, 1);
    for (const auto& p : pos) {
      const Vec2 xy = grid.from_feature(static_cast<double>(p.row) + rng.uniform(0.0, 1.0),
                                        static_cast<double>(p.col) + rng.uniform(0.0, 1.0));
      gt.push_back(corners_3d(make_box(xy.x, xy.y, rng.uniform(-1.5, 0.0), rng.uniform(3.5, 4.5),
                                       rng.uniform(1.5, 2.0), rng.uniform(1.4, 1.7),
                                       rng.uniform(-kPi, kPi))));
      pred.offset.at(p.row, p.col, 0) = rng.uniform(0.0, 1.0);
      pred.offset.at(p.row, p.col, 1) = rng.uniform(0.0, 1.0);
      pred.z.at(p.row, p.col) = rng.uniform(-1.5, 0.0);
      for (std::size_t k = 0; k < 3; ++k) {
        pred.size.at(p.row, p.col, k) = rng.uniform(0.5, 5.0);
      }
      pred.direction.at(p.row, p.col, 0) = rng.uniform(-1.0, 1.0);
      pred.direction.at(p.row, p.col, 1) = rng.uniform(-1.0, 1.0);
    }
    for (const bool average : {false, true}) {
      LossConfig dcfg = cfg;
      dcfg.decode_average_corners = average;
      const auto d = decode_loss(pred, pos, gt, grid, pos.size(), dcfg);
      const auto value = [&] { return decode_loss(pred, pos, gt, grid, pos.size(), dcfg).value; };
      const std::string suffix = average ? " (corner mean)" : "";
      ck.run("decode_loss/offset" + suffix, pred.offset.data(), d.grad_offset.data(), value);
      ck.run("decode_loss/z" + suffix, pred.z.data(), d.grad_z.data(), value);
      ck.run("decode_loss/size" + suffix, pred.size.data(), d.grad_size.data(), value);
      ck.run("decode_loss/direction" + suffix, pred.direction.data(), d.grad_direction.data(),
             value);
    }
  }

  {  // Weighted total over encoded targets of a synthetic scene.
    RunConfig rc = run_config_from_kv(KeyValues{});
    rc.scene.classes.push_back(ClassSizeSpec{"Pedestrian", {0.6, 1.0}, {0.5, 0.8}, {1.5, 1.9}});
    const LabeledScene scene = crop_to_grid(synth_scene(rc.scene, rng.next_u64()), rc.grid);
    const TargetSet ts = encode_targets(scene.boxes, scene.classes, rc.encoder());
    const std::size_t rows = ts.maps.rows();
    const std::size_t cols = ts.maps.cols();
    const std::size_t nc = ts.maps.classes();
    HeadMaps pred{random_grid(rng, rows, cols, nc, 0.05, 0.95),
                  random_grid(rng, rows, cols, nc, 0.05, 0.95),
                  random_grid(rng, rows, cols, 2, 0.0, 1.0),
                  random_grid(rng, rows, cols, 1, -2.0, 0.0),
                  random_grid(rng, rows, cols, 3, 0.5, 5.0),
                  random_grid(rng, rows, cols, 2, -1.0, 1.0)};
    const LossReport rep = compute_losses(pred, ts, rc.grid, rc.loss);
    const auto value = [&] { return total_loss(compute_losses(pred, ts, rc.grid, rc.loss), rc.loss); };
    ck.run("total_loss/center", pred.center.data(), rep.grad.center.data(), value);
    ck.run("total_loss/corner", pred.corner.data(), rep.grad.corner.data(), value);
    ck.run("total_loss/offset", pred.offset.data(), rep.grad.offset.data(), value);
    ck.run("total_loss/z", pred.z.data(), rep.grad.z.data(), value);
    ck.run("total_loss/size", pred.size.data(), rep.grad.size.data(), value);
    ck.run("total_loss/direction", pred.direction.data(), rep.grad.direction.data(), value);
  }
}

void check_layers(Checker& ck, Rng& rng) {
  struct Geometry {
    std::size_t k;
    int stride;
    int pad;
  };
  for (const Geometry g : {Geometry{3, 1, 1}, Geometry{3, 2, 1}, Geometry{1, 1, 0}}) {
    Grid2D input = random_grid(rng, 7, 6, 3, -1.0, 1.0);
    nn::Tensor kernel({g.k, g.k, 3, 4});
    for (double& v : kernel.data) {
      v = rng.uniform(-1.0, 1.0);
    }
    std::vector<double> bias(4);
    for (double& v : bias) {
      v = rng.uniform(-1.0, 1.0);
    }
    const Grid2D out = nn::conv2d(input, kernel, bias, g.stride, g.pad);
    const Projection proj{random_grid(rng, out.height(), out.width(), out.channels(), -1.0, 1.0)};
    const auto grads = nn::conv2d_backward(input, kernel, proj.weights, g.stride, g.pad);
    const auto value = [&] { return proj(nn::conv2d(input, kernel, bias, g.stride, g.pad)); };
    const std::string tag = "conv2d k" + std::to_string(g.k) + " s" + std::to_string(g.stride) +
                            " p" + std::to_string(g.pad);
    ck.run(tag + "/input", input.data(), grads.input.data(), value);
    ck.run(tag + "/kernel", kernel.data, grads.kernel.data, value);
    ck.run(tag + "/bias", bias, grads.bias, value);
  }

  const std::pair<const char*, nn::Activation> acts[] = {
      {"leaky_relu", nn::Activation::kLeakyRelu},
      {"logistic", nn::Activation::kLogistic},
      {"tanh", nn::Activation::kTanh}};
  for (const auto& [name, kind] : acts) {
    Grid2D x = random_grid(rng, 6, 6, 3, -3.0, 3.0);
    for (double& v : x.data()) {
      if (std::abs(v) < 1e-3) {
        v = 0.5;
      }
    }
    const Projection proj{random_grid(rng, 6, 6, 3, -1.0, 1.0)};
    const Grid2D grad = nn::activate_backward(x, proj.weights, kind);
    ck.run(std::string("activation/") + name, x.data(), grad.data(),
           [&] { return proj(nn::activate(x, kind)); });
  }

  const auto params_of = [](std::vector<nn::Param*> ps, std::vector<double>& flat_grad) {
    flat_grad.clear();
    for (auto* p : ps) {
      flat_grad.insert(flat_grad.end(), p->grad.data.begin(), p->grad.data.end());
    }
  };
  // Every parameter tensor gets its share of the probes; one row per module.
  const auto check_params = [&](const std::string& name, std::vector<nn::Param*> ps,
                                const std::vector<double>& flat_grad, const Scalar& value) {
    std::size_t offset = 0;
    GradcheckRow merged{name, 0, 0.0, true};
    std::vector<GradcheckRow> sub;
    GradcheckOptions few = ck.opt;
    few.probes = std::max<std::size_t>(ck.opt.probes / ps.size() + 1, 10);
    Checker per{few, ck.rng, sub};
    for (auto* p : ps) {
      const std::span<const double> g(flat_grad.data() + offset, p->value.size());
      per.run(p->name, p->value.data, g, value);
      offset += p->value.size();
    }
    for (const auto& r : sub) {
      merged.probes += r.probes;
      merged.worst_rel_error = std::max(merged.worst_rel_error, r.worst_rel_error);
    }
    merged.pass = merged.worst_rel_error < ck.opt.tolerance;
    ck.rows.push_back(merged);
  };

  for (const auto variant : {nn::HeadVariant::kSplit, nn::HeadVariant::kMerge}) {
    const std::string name = variant == nn::HeadVariant::kSplit ? "head_split" : "head_merge";
    nn::HeadSpec spec{variant, 5, 6, 2};
    nn::Head head(spec);
    head.init(rng);
    Grid2D features = random_grid(rng, 5, 5, 5, -1.0, 1.0);
    auto outs = head.forward(features);
    std::vector<Projection> projs;
    std::vector<Grid2D> weights;
    for (const auto& o : outs) {
      projs.push_back({random_grid(rng, o.height(), o.width(), o.channels(), -1.0, 1.0)});
      weights.push_back(projs.back().weights);
    }
    const auto value = [&] {
      const auto ys = head.forward(features);
      double s = 0.0;
      for (std::size_t i = 0; i < ys.size(); ++i) {
        s += projs[i](ys[i]);
      }
      return s;
    };
    for (auto* p : head.params()) {
      std::fill(p->grad.data.begin(), p->grad.data.end(), 0.0);
    }
    head.forward(features);
    const Grid2D g_in = head.backward(weights);
    std::vector<double> flat;
    params_of(head.params(), flat);
    ck.run(name + "/input", features.data(), g_in.data(), value);
    check_params(name + "/params", head.params(), flat, value);
  }

  {
    nn::BackboneSpec spec{4, {3, 5}, 1};
    nn::Backbone bb(spec);
    bb.init(rng);
    Grid2D input = random_grid(rng, 8, 8, 4, 0.0, 1.0);
    const Grid2D out = bb.forward(input);
    const Projection proj{random_grid(rng, out.height(), out.width(), out.channels(), -1.0, 1.0)};
    for (auto* p : bb.params()) {
      std::fill(p->grad.data.begin(), p->grad.data.end(), 0.0);
    }
    const Grid2D g_in = bb.backward(proj.weights);
    std::vector<double> flat;
    params_of(bb.params(), flat);
    const auto value = [&] { return proj(bb.forward(input)); };
    ck.run("backbone/input", input.data(), g_in.data(), value);
    check_params("backbone/params", bb.params(), flat, value);
  }
}

}  // namespace

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

std::vector<GradcheckRow> run_gradcheck(const GradcheckOptions& opt) {
  if (opt.probes < 1 || !(opt.step > 0.0) || !(opt.tolerance > 0.0)) {
    throw InvalidArgument("gradcheck: probes, step and tolerance must be positive");
  }
  Rng rng(opt.seed);
  std::vector<GradcheckRow> rows;
  Checker ck{opt, rng, rows};
  check_losses(ck, rng);
  check_layers(ck, rng);
  return rows;
}

std::string format_gradcheck(const std::vector<GradcheckRow>& rows) {
  std::ostringstream os;
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-40s %7s %14s %s\n", "operation", "probes", "worst_rel_err",
                "status");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-40s %7zu %14.3e %s\n", r.name.c_str(), r.probes,
                  r.worst_rel_error, r.pass ? "pass" : "FAIL");
    os << buf;
  }
  return os.str();
}

}  // namespace cn3d
