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

#include "cn3d/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cn3d/error.hpp"

namespace cn3d {

namespace {

void require_same_shape(const Grid2D& pred, const Grid2D& target, const char* who) {
  if (!pred.same_shape(target)) {
    throw InvalidArgument(std::string(who) + ": prediction and target shapes differ");
  }
}

void require_in_grid(const Grid2D& g, std::span<const Peak> positives, const char* who) {
  for (const auto& p : positives) {
    if (p.row >= g.height() || p.col >= g.width()) {
      throw InvalidArgument(std::string(who) + ": positive cell (" + std::to_string(p.row) + ", " +
                            std::to_string(p.col) + ") outside the grid");
    }
  }
}

double norm_of(std::size_t n) { return 1.0 / static_cast<double>(std::max<std::size_t>(n, 1)); }

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

double LossConfig::b() const { return std::exp(gamma / a) - 1.0; }

double LossConfig::c_b() const {
  // Inner branch at 1: (a/b)(b+1) ln(b+1) - a = gamma (b+1)/b - a.
  const double bb = b();
  return gamma * (bb + 1.0) / bb - a - gamma;
}

void LossConfig::validate() const {
  if (!(a > 0.0) || !(gamma > 0.0) || alpha < 0.0 || beta < 0.0 || !(eps > 0.0 && eps < 0.5)) {
    throw InvalidArgument("LossConfig: invalid shape parameter");
  }
  for (double w : {w_cls, w_off, w_z, w_size, w_dir, w_cor, w_decode}) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw InvalidArgument("LossConfig: weights must be finite and non-negative");
    }
  }
}

LossConfig loss_config_from_kv(const KeyValues& kv, const std::string& prefix) {
  LossConfig c;
  c.alpha = kv.get_double(prefix + "alpha", c.alpha);
  c.beta = kv.get_double(prefix + "beta", c.beta);
  c.a = kv.get_double(prefix + "a", c.a);
  c.gamma = kv.get_double(prefix + "gamma", c.gamma);
  c.w_cls = kv.get_double(prefix + "w_cls", c.w_cls);
  c.w_off = kv.get_double(prefix + "w_off", c.w_off);
  c.w_z = kv.get_double(prefix + "w_z", c.w_z);
  c.w_size = kv.get_double(prefix + "w_size", c.w_size);
  c.w_dir = kv.get_double(prefix + "w_dir", c.w_dir);
  c.w_cor = kv.get_double(prefix + "w_cor", c.w_cor);
  c.w_decode = kv.get_double(prefix + "w_decode", c.w_decode);
  const auto kind = kv.get_string(prefix + "size_loss", "balanced");
  if (kind == "balanced") {
    c.size_loss = RegressionLoss::kBalancedL1;
  } else if (kind == "l1") {
    c.size_loss = RegressionLoss::kL1;
  } else {
    throw InvalidArgument("loss.size_loss must be 'balanced' or 'l1'");
  }
  c.decode_average_corners = kv.get_bool(prefix + "decode_average_corners", false);
  c.validate();
  return c;
}

LossTerm focal_heatmap_loss(const Grid2D& pred, const Grid2D& target, double alpha, double beta,
                            std::size_t n, double eps) {
  require_same_shape(pred, target, "focal_heatmap_loss");
  const double inv_n = norm_of(n);
  LossTerm out{0.0, Grid2D(pred.height(), pred.width(), pred.channels())};
  const auto p_data = pred.data();
  const auto y_data = target.data();
  auto g_data = out.grad.data();
  double sum = 0.0;
  for (std::size_t i = 0; i < p_data.size(); ++i) {
    const double raw = p_data[i];
    const double p = std::clamp(raw, eps, 1.0 - eps);
    const bool clamped = p != raw;
    const double y = y_data[i];
    double grad;
    if (y == 1.0) {
      const double q = 1.0 - p;
      const double log_p = std::log(p);
      sum += std::pow(q, alpha) * log_p;
      grad = alpha * std::pow(q, alpha - 1.0) * log_p - std::pow(q, alpha) / p;
    } else {
      const double wneg = std::pow(1.0 - y, beta);
      const double log_q = std::log(1.0 - p);
      sum += wneg * std::pow(p, alpha) * log_q;
      grad = -wneg * (alpha * std::pow(p, alpha - 1.0) * log_q - std::pow(p, alpha) / (1.0 - p));
    }
    g_data[i] = clamped ? 0.0 : grad * inv_n;
  }
  out.value = -sum * inv_n;
  return out;
}

LossTerm masked_l1_loss(const Grid2D& pred, const Grid2D& target, std::span<const Peak> positives,
                        std::size_t n) {
  require_same_shape(pred, target, "masked_l1_loss");
  require_in_grid(pred, positives, "masked_l1_loss");
  const double inv_n = norm_of(n);
  LossTerm out{0.0, Grid2D(pred.height(), pred.width(), pred.channels())};
  for (const auto& p : positives) {
    for (std::size_t ch = 0; ch < pred.channels(); ++ch) {
      const double r = pred.at(p.row, p.col, ch) - target.at(p.row, p.col, ch);
      out.value += std::abs(r) * inv_n;
      out.grad.at(p.row, p.col, ch) += sign(r) * inv_n;
    }
  }
  return out;
}

std::pair<double, double> balanced_l1(double x, const LossConfig& cfg) {
  const double ax = std::abs(x);
  if (ax < 1.0) {
    const double b = cfg.b();
    const double bx1 = b * ax + 1.0;
    const double log_bx1 = std::log(bx1);
    return {cfg.a / b * bx1 * log_bx1 - cfg.a * ax, sign(x) * cfg.a * log_bx1};
  }
  return {cfg.gamma * ax + cfg.c_b(), sign(x) * cfg.gamma};
}

LossTerm masked_balanced_loss(const Grid2D& pred, const Grid2D& target,
                              std::span<const Peak> positives, std::size_t n,
                              const LossConfig& cfg) {
  require_same_shape(pred, target, "masked_balanced_loss");
  require_in_grid(pred, positives, "masked_balanced_loss");
  const double inv_n = norm_of(n);
  LossTerm out{0.0, Grid2D(pred.height(), pred.width(), pred.channels())};
  for (const auto& p : positives) {
    for (std::size_t ch = 0; ch < pred.channels(); ++ch) {
      const auto [v, d] = balanced_l1(pred.at(p.row, p.col, ch) - target.at(p.row, p.col, ch), cfg);
      out.value += v * inv_n;
      out.grad.at(p.row, p.col, ch) += d * inv_n;
    }
  }
  return out;
}

namespace {

// Corner k in corners_3d() order: signs along heading, across heading, vertical.
constexpr std::array<std::array<double, 3>, 8> kCornerSigns{{{1, 1, -1},
                                                             {1, -1, -1},
                                                             {-1, -1, -1},
                                                             {-1, 1, -1},
                                                             {1, 1, 1},
                                                             {1, -1, 1},
                                                             {-1, -1, 1},
                                                             {-1, 1, 1}}};

struct CellRegression {
  double cx, cy, cz, l, w, h, c, s;
};

CellRegression read_cell(const HeadMaps& pred, const Peak& p, const GridConfig& grid) {
  const Vec2 xy = grid.from_feature(static_cast<double>(p.row) + pred.offset.at(p.row, p.col, 0),
                                    static_cast<double>(p.col) + pred.offset.at(p.row, p.col, 1));
  return {xy.x,
          xy.y,
          pred.z.at(p.row, p.col),
          pred.size.at(p.row, p.col, 0),
          pred.size.at(p.row, p.col, 1),
          pred.size.at(p.row, p.col, 2),
          pred.direction.at(p.row, p.col, 0),
          pred.direction.at(p.row, p.col, 1)};
}

Vec3 corner_of(const CellRegression& r, std::size_t k) {
  const double lx = kCornerSigns[k][0] * 0.5 * r.l;
  const double ly = kCornerSigns[k][1] * 0.5 * r.w;
  return {r.cx + r.c * lx - r.s * ly, r.cy + r.s * lx + r.c * ly,
          r.cz + kCornerSigns[k][2] * 0.5 * r.h};
}

}  // namespace

std::array<Vec3, 8> decode_corners(const HeadMaps& pred, const Peak& cell, const GridConfig& grid) {
  const auto r = read_cell(pred, cell, grid);
  std::array<Vec3, 8> out;
  for (std::size_t k = 0; k < 8; ++k) {
    out[k] = corner_of(r, k);
  }
  return out;
}

DecodeLoss decode_loss(const HeadMaps& pred, std::span<const Peak> positives,
                       std::span<const std::array<Vec3, 8>> gt_corners, const GridConfig& grid,
                       std::size_t n, const LossConfig& cfg) {
  pred.check();
  if (gt_corners.size() != positives.size()) {
    throw InvalidArgument("decode_loss: missing ground-truth corners for " +
                          std::to_string(positives.size() - std::min(positives.size(),
                                                                     gt_corners.size())) +
                          " positive(s)");
  }
  require_in_grid(pred.z, positives, "decode_loss");
  const std::size_t rows = pred.rows();
  const std::size_t cols = pred.cols();
  DecodeLoss out{0.0, Grid2D(rows, cols, 2), Grid2D(rows, cols, 1), Grid2D(rows, cols, 3),
                 Grid2D(rows, cols, 2)};
  const double scale = norm_of(n) * (cfg.decode_average_corners ? 1.0 / 8.0 : 1.0);
  const double dx = grid.feature_dx();
  const double dy = grid.feature_dy();

  for (std::size_t i = 0; i < positives.size(); ++i) {
    const Peak& p = positives[i];
    const auto r = read_cell(pred, p, grid);
    double g_cx = 0, g_cy = 0, g_cz = 0, g_l = 0, g_w = 0, g_h = 0, g_c = 0, g_s = 0;
    for (std::size_t k = 0; k < 8; ++k) {
      const Vec3 q = corner_of(r, k);
      const Vec3& t = gt_corners[i][k];
      const Vec3 d{q.x - t.x, q.y - t.y, q.z - t.z};
      const double dist = std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
      const auto [v, dv] = balanced_l1(dist, cfg);
      out.value += v * scale;
      if (dist == 0.0) {
        continue;
      }
      // Gradient of the loss with respect to the decoded corner.
      const double f = dv * scale / dist;
      const Vec3 gq{f * d.x, f * d.y, f * d.z};
      const double sx = kCornerSigns[k][0];
      const double sy = kCornerSigns[k][1];
      const double sz = kCornerSigns[k][2];
      const double lx = sx * 0.5 * r.l;
      const double ly = sy * 0.5 * r.w;
      g_cx += gq.x;
      g_cy += gq.y;
      g_cz += gq.z;
      g_l += 0.5 * sx * (r.c * gq.x + r.s * gq.y);
      g_w += 0.5 * sy * (-r.s * gq.x + r.c * gq.y);
      g_h += 0.5 * sz * gq.z;
      g_c += lx * gq.x + ly * gq.y;
      g_s += -ly * gq.x + lx * gq.y;
    }
    out.grad_offset.at(p.row, p.col, 0) += g_cx * dx;
    out.grad_offset.at(p.row, p.col, 1) += g_cy * dy;
    out.grad_z.at(p.row, p.col) += g_cz;
    out.grad_size.at(p.row, p.col, 0) += g_l;
    out.grad_size.at(p.row, p.col, 1) += g_w;
    out.grad_size.at(p.row, p.col, 2) += g_h;
    out.grad_direction.at(p.row, p.col, 0) += g_c;
    out.grad_direction.at(p.row, p.col, 1) += g_s;
  }
  return out;
}

std::string_view loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::kCls:
      return "cls";
    case LossKind::kOff:
      return "off";
    case LossKind::kZ:
      return "z";
    case LossKind::kSize:
      return "size";
    case LossKind::kDir:
      return "dir";
    case LossKind::kCor:
      return "cor";
    case LossKind::kDecode:
      return "decode";
  }
  return "?";
}

double LossReport::get(LossKind k) const {
  const auto& v = values[static_cast<std::size_t>(k)];
  if (!v) {
    throw InvalidArgument("LossReport: missing term '" + std::string(loss_name(k)) + "'");
  }
  return *v;
}

double total_loss(const LossReport& r, const LossConfig& cfg) {
  return cfg.w_cls * r.get(LossKind::kCls) + cfg.w_off * r.get(LossKind::kOff) +
         cfg.w_z * r.get(LossKind::kZ) + cfg.w_size * r.get(LossKind::kSize) +
         cfg.w_dir * r.get(LossKind::kDir) + cfg.w_cor * r.get(LossKind::kCor) +
         cfg.w_decode * r.get(LossKind::kDecode);
}

namespace {

void add_scaled(Grid2D& dst, const Grid2D& src, double k) {
  auto d = dst.data();
  const auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] += k * s[i];
  }
}

}  // namespace

LossReport compute_losses(const HeadMaps& pred, const TargetSet& targets, const GridConfig& grid,
                          const LossConfig& cfg) {
  pred.check();
  targets.maps.check();
  if (pred.rows() != targets.maps.rows() || pred.cols() != targets.maps.cols() ||
      pred.classes() != targets.maps.classes()) {
    throw InvalidArgument("compute_losses: prediction and target maps differ in shape");
  }
  const auto& pos = targets.positives;
  const std::size_t n = pos.size();
  LossReport rep;
  rep.grad = HeadMaps::zeros(pred.rows(), pred.cols(), pred.classes());

  const auto cls = focal_heatmap_loss(pred.center, targets.maps.center, cfg.alpha, cfg.beta, n,
                                      cfg.eps);
  rep.set(LossKind::kCls, cls.value);
  add_scaled(rep.grad.center, cls.grad, cfg.w_cls);

  const auto cor = focal_heatmap_loss(pred.corner, targets.maps.corner, cfg.alpha, cfg.beta, n,
                                      cfg.eps);
  rep.set(LossKind::kCor, cor.value);
  add_scaled(rep.grad.corner, cor.grad, cfg.w_cor);

  const auto off = masked_l1_loss(pred.offset, targets.maps.offset, pos, n);
  rep.set(LossKind::kOff, off.value);
  add_scaled(rep.grad.offset, off.grad, cfg.w_off);

  const auto dir = masked_l1_loss(pred.direction, targets.maps.direction, pos, n);
  rep.set(LossKind::kDir, dir.value);
  add_scaled(rep.grad.direction, dir.grad, cfg.w_dir);

  const auto z = masked_balanced_loss(pred.z, targets.maps.z, pos, n, cfg);
  rep.set(LossKind::kZ, z.value);
  add_scaled(rep.grad.z, z.grad, cfg.w_z);

  const auto size = cfg.size_loss == RegressionLoss::kBalancedL1
                        ? masked_balanced_loss(pred.size, targets.maps.size, pos, n, cfg)
                        : masked_l1_loss(pred.size, targets.maps.size, pos, n);
  rep.set(LossKind::kSize, size.value);
  add_scaled(rep.grad.size, size.grad, cfg.w_size);

  const auto dec = decode_loss(pred, pos, targets.gt_corners, grid, n, cfg);
  rep.set(LossKind::kDecode, dec.value);
  add_scaled(rep.grad.offset, dec.grad_offset, cfg.w_decode);
  add_scaled(rep.grad.z, dec.grad_z, cfg.w_decode);
  add_scaled(rep.grad.size, dec.grad_size, cfg.w_decode);
  add_scaled(rep.grad.direction, dec.grad_direction, cfg.w_decode);
  return rep;
}

}  // namespace cn3d
