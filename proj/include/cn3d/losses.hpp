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

// Training objectives with analytic gradients with respect to the activated
// head outputs. Every function returns the loss value and a gradient map of
// the prediction's shape.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <utility>

#include "cn3d/config.hpp"
#include "cn3d/geom.hpp"
#include "cn3d/head_maps.hpp"
#include "cn3d/targets.hpp"
#include "cn3d/voxelize.hpp"

namespace cn3d {

enum class RegressionLoss { kBalancedL1, kL1 };

struct LossConfig {
  // Focal exponents.
  double alpha = 2.0;
  double beta = 4.0;
  // Balanced L1 shape; b and c_b are derived.
  double a = 0.5;
  double gamma = 1.5;
  // Term weights.
  double w_cls = 0.5;
  double w_off = 1.0;
  double w_z = 1.0;
  double w_size = 1.0;
  double w_dir = 1.0;
  double w_cor = 0.1;
  double w_decode = 0.5;

  RegressionLoss size_loss = RegressionLoss::kBalancedL1;
  bool decode_average_corners = false;  // divide the corner sum by 8 as well
  double eps = 1e-7;                    // probability clamp before log

  /// b = exp(gamma / a) - 1, i.e. a ln(b + 1) = gamma.
  double b() const;
  /// Constant of the linear branch that makes the two branches meet at |x| = 1.
  double c_b() const;

  void validate() const;
};

/// Reads `<prefix>alpha`, `beta`, `a`, `gamma`, `w_cls` ... `w_decode`,
/// `size_loss` (balanced|l1), `decode_average_corners`.
LossConfig loss_config_from_kv(const KeyValues& kv, const std::string& prefix = "loss.");

struct LossTerm {
  double value = 0.0;
  Grid2D grad;
};

/// Penalty-reduced focal loss over all cells and channels, normalized by max(n, 1).
LossTerm focal_heatmap_loss(const Grid2D& pred, const Grid2D& target, double alpha, double beta,
                            std::size_t n, double eps = 1e-7);

/// Sum over positive cells and channels of |pred - target|, divided by max(n, 1).
LossTerm masked_l1_loss(const Grid2D& pred, const Grid2D& target, std::span<const Peak> positives,
                        std::size_t n);

/// Balanced L1 value and derivative at x.
std::pair<double, double> balanced_l1(double x, const LossConfig& cfg);

/// As masked_l1_loss with balanced_l1 applied to each residual.
LossTerm masked_balanced_loss(const Grid2D& pred, const Grid2D& target,
                              std::span<const Peak> positives, std::size_t n,
                              const LossConfig& cfg);

struct DecodeLoss {
  double value = 0.0;
  Grid2D grad_offset;
  Grid2D grad_z;
  Grid2D grad_size;
  Grid2D grad_direction;
};

/// Decodes the regression channels at each positive into 8 box corners
/// (directly from the cos/sin channels) and applies balanced_l1 to the
/// distance to each ground-truth corner. Summed over corners, divided by max(n, 1).
DecodeLoss decode_loss(const HeadMaps& pred, std::span<const Peak> positives,
                       std::span<const std::array<Vec3, 8>> gt_corners, const GridConfig& grid,
                       std::size_t n, const LossConfig& cfg);

/// Corners decoded from the regression channels at one cell, in corners_3d() order.
std::array<Vec3, 8> decode_corners(const HeadMaps& pred, const Peak& cell, const GridConfig& grid);

enum class LossKind : std::size_t { kCls, kOff, kZ, kSize, kDir, kCor, kDecode };
inline constexpr std::size_t kNumLossKinds = 7;
std::string_view loss_name(LossKind kind);

/// Unweighted term values and the gradient of the weighted total.
struct LossReport {
  std::array<std::optional<double>, kNumLossKinds> values;
  HeadMaps grad;

  void set(LossKind k, double v) { values[static_cast<std::size_t>(k)] = v; }
  double get(LossKind k) const;
};

/// Weighted sum of all seven terms. Throws InvalidArgument if one is missing.
double total_loss(const LossReport& report, const LossConfig& cfg);

/// Evaluates every term of the objective for one frame.
LossReport compute_losses(const HeadMaps& pred, const TargetSet& targets, const GridConfig& grid,
                          const LossConfig& cfg);

}  // namespace cn3d
