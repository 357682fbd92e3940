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

// Minimal dense network kernel: HWC activations stored in Grid2D, parameters
// in Tensor, explicit forward/backward passes, AdamW and a one-cycle schedule.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cn3d/config.hpp"
#include "cn3d/geom.hpp"
#include "cn3d/head_maps.hpp"
#include "cn3d/rng.hpp"

namespace cn3d::nn {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape_, double fill = 0.0);

  std::size_t size() const { return data.size(); }
  void check() const;
};

// --- Layers as free functions ---------------------------------------------

/// Cross-correlation. kernel shape {k, k, c_in, c_out}; bias has c_out entries.
Grid2D conv2d(const Grid2D& input, const Tensor& kernel, std::span<const double> bias, int stride,
              int padding);

struct Conv2dGrads {
  Grid2D input;
  Tensor kernel;
  std::vector<double> bias;
};

Conv2dGrads conv2d_backward(const Grid2D& input, const Tensor& kernel, const Grid2D& grad_out,
                            int stride, int padding);

enum class Activation { kNone, kLeakyRelu, kLogistic, kTanh };

inline constexpr double kLeakySlope = 0.1;

double activate(double x, Activation kind);
/// d activate / dx at x.
double activate_derivative(double x, Activation kind);

Grid2D activate(const Grid2D& x, Activation kind);
/// Gradient with respect to the pre-activation input x.
Grid2D activate_backward(const Grid2D& x, const Grid2D& grad_out, Activation kind);

/// Stride-1 3x3 max pooling per channel; borders use the cells that exist.
Grid2D maxpool2d_3x3_same(const Grid2D& x);

// --- Parameterized modules ------------------------------------------------

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
};

/// Conv layer with cached input for the backward pass.
class Conv2d {
 public:
  Conv2d(std::string name, std::size_t k, std::size_t c_in, std::size_t c_out, int stride,
         int padding);

  /// Uniform in +-1/sqrt(fan_in) for kernel and bias.
  void init(Rng& rng);

  Grid2D forward(const Grid2D& input);
  /// Accumulates parameter gradients and returns the input gradient.
  Grid2D backward(const Grid2D& grad_out);

  Param& weight() { return weight_; }
  Param& bias() { return bias_; }
  const Param& weight() const { return weight_; }
  const Param& bias() const { return bias_; }

 private:
  Param weight_;
  Param bias_;
  int stride_;
  int padding_;
  Grid2D input_;
};

enum class HeadVariant { kSplit, kMerge };

struct BranchSpec {
  std::string name;
  std::vector<Activation> activations;  // one per output channel
};

struct HeadSpec {
  HeadVariant variant = HeadVariant::kSplit;
  std::size_t in_channels = 32;
  std::size_t hidden = 64;
  std::size_t num_classes = 1;

  /// Split: center C, offset 2, z 1, size 3, direction 2, corner C.
  /// Merge: center C, box 8, corner C.
  std::vector<BranchSpec> branches() const;
  void validate() const;
};

/// conv3x3 -> leaky relu -> conv1x1 -> per-channel activation, per branch.
class Head {
 public:
  explicit Head(const HeadSpec& spec);

  void init(Rng& rng, double heat_prior = 0.01);

  /// Activated outputs, one per branch in HeadSpec::branches() order.
  std::vector<Grid2D> forward(const Grid2D& features);
  /// Returns the gradient with respect to the features.
  Grid2D backward(const std::vector<Grid2D>& grad_outputs);

  /// Rearranges branch outputs into the shared map layout.
  HeadMaps to_maps(const std::vector<Grid2D>& outputs) const;
  /// Inverse of to_maps() for gradients.
  std::vector<Grid2D> from_maps(const HeadMaps& grads) const;

  const HeadSpec& spec() const { return spec_; }
  std::vector<Param*> params();

 private:
  struct Branch {
    BranchSpec spec;
    Conv2d conv3;
    Conv2d conv1;
    Grid2D hidden_pre;
    Grid2D out_pre;
  };
  HeadSpec spec_;
  std::vector<Branch> branches_;
};

/// Stand-in for the sparse 3D backbone: log2(stride) conv3x3 stride-2 blocks
/// then `extra_blocks` conv3x3 stride-1 blocks, each followed by leaky relu.
struct BackboneSpec {
  std::size_t in_channels = 4;
  std::vector<std::size_t> widths{16, 32};  // one per stride-2 block
  std::size_t extra_blocks = 0;

  void validate() const;
  std::size_t out_channels() const { return widths.back(); }
};

class Backbone {
 public:
  explicit Backbone(const BackboneSpec& spec);
  void init(Rng& rng);
  Grid2D forward(const Grid2D& input);
  Grid2D backward(const Grid2D& grad_out);
  std::vector<Param*> params();
  const BackboneSpec& spec() const { return spec_; }

 private:
  BackboneSpec spec_;
  std::vector<Conv2d> convs_;
  std::vector<Grid2D> pre_;
};

class Detector {
 public:
  Detector(const BackboneSpec& backbone, const HeadSpec& head);

  void init(std::uint64_t seed);
  HeadMaps forward(const Grid2D& bev);
  /// Accumulates parameter gradients from gradients of the activated maps.
  void backward(const HeadMaps& grads);

  std::vector<Param*> params();
  void zero_grad();
  std::size_t parameter_count();

  const Head& head() const { return head_; }
  const Backbone& backbone() const { return backbone_; }

 private:
  Backbone backbone_;
  Head head_;
};

// --- Optimization -----------------------------------------------------------

struct AdamWState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::size_t step = 0;
};

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Bias-corrected Adam update followed by decoupled decay p -= lr * wd * p.
void adamw_step(std::span<Param* const> params, AdamWState& state, const AdamWConfig& cfg);

struct OneCycleConfig {
  double max_lr = 2.25e-3;
  double div_factor = 10.0;
  double final_div_factor = 1e4;  // final lr = max_lr / (div_factor * final_div_factor)
  double momentum_max = 0.95;
  double momentum_min = 0.85;
  double warm_fraction = 0.3;
  std::size_t total_steps = 1000;

  void validate() const;
};

struct ScheduleValue {
  double lr = 0.0;
  double momentum = 0.0;
};

/// Cosine one-cycle: lr rises max/div -> max over the warm fraction, then
/// anneals to the final lr; momentum moves max -> min -> max in antiphase.
ScheduleValue one_cycle(std::size_t step, const OneCycleConfig& cfg);

// --- Checkpoints ------------------------------------------------------------

/// manifest.txt: header `key value` lines, then `param <name> <ndim> <dims...>`.
/// Each parameter's values go to `<name>.f32` as little-endian float32.
void save_checkpoint(const std::filesystem::path& dir, std::span<Param* const> params,
                     const KeyValues& header);
/// Loads values into params; names and shapes must match. Returns the header.
KeyValues load_checkpoint(const std::filesystem::path& dir, std::span<Param* const> params);

}  // namespace cn3d::nn
