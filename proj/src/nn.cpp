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

#include "cn3d/nn.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cn3d/error.hpp"
#include "cn3d/grid_io.hpp"

namespace cn3d::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMatrix = Eigen::Map<RowMatrix>;
using ConstMapMatrix = Eigen::Map<const RowMatrix>;

struct ConvGeometry {
  std::size_t k, c_in, c_out, h, w, ho, wo;
  long stride, pad;
};

ConvGeometry geometry(const Grid2D& input, const Tensor& kernel, int stride, int padding) {
  if (kernel.shape.size() != 4 || kernel.shape[0] != kernel.shape[1]) {
    throw InvalidArgument("conv2d: kernel must have shape {k, k, c_in, c_out}");
  }
  if (kernel.shape[2] != input.channels()) {
    throw InvalidArgument("conv2d: kernel expects " + std::to_string(kernel.shape[2]) +
                          " input channels, got " + std::to_string(input.channels()));
  }
  if (stride < 1 || padding < 0) {
    throw InvalidArgument("conv2d: stride must be >= 1 and padding >= 0");
  }
  ConvGeometry g{};
  g.k = kernel.shape[0];
  g.c_in = kernel.shape[2];
  g.c_out = kernel.shape[3];
  g.h = input.height();
  g.w = input.width();
  g.stride = stride;
  g.pad = padding;
  const long eh = static_cast<long>(g.h) + 2 * padding - static_cast<long>(g.k);
  const long ew = static_cast<long>(g.w) + 2 * padding - static_cast<long>(g.k);
  if (eh < 0 || ew < 0) {
    throw InvalidArgument("conv2d: kernel larger than padded input");
  }
  g.ho = static_cast<std::size_t>(eh / stride + 1);
  g.wo = static_cast<std::size_t>(ew / stride + 1);
  return g;
}

// Rows are output cells; columns run over (ky, kx, c_in) to match the kernel layout.
RowMatrix im2col(const Grid2D& input, const ConvGeometry& g) {
  RowMatrix cols = RowMatrix::Zero(static_cast<Eigen::Index>(g.ho * g.wo),
                                   static_cast<Eigen::Index>(g.k * g.k * g.c_in));
  const auto in = input.data();
  for (std::size_t oy = 0; oy < g.ho; ++oy) {
    for (std::size_t ox = 0; ox < g.wo; ++ox) {
      double* row = cols.data() + (oy * g.wo + ox) * g.k * g.k * g.c_in;
      for (std::size_t ky = 0; ky < g.k; ++ky) {
        const long iy = static_cast<long>(oy) * g.stride - g.pad + static_cast<long>(ky);
        if (iy < 0 || iy >= static_cast<long>(g.h)) {
          continue;
        }
        for (std::size_t kx = 0; kx < g.k; ++kx) {
          const long ix = static_cast<long>(ox) * g.stride - g.pad + static_cast<long>(kx);
          if (ix < 0 || ix >= static_cast<long>(g.w)) {
            continue;
          }
          const double* src = in.data() + (static_cast<std::size_t>(iy) * g.w +
                                           static_cast<std::size_t>(ix)) * g.c_in;
          std::copy(src, src + g.c_in, row + (ky * g.k + kx) * g.c_in);
        }
      }
    }
  }
  return cols;
}

void col2im(const RowMatrix& cols, const ConvGeometry& g, Grid2D& out) {
  auto dst = out.data();
  for (std::size_t oy = 0; oy < g.ho; ++oy) {
    for (std::size_t ox = 0; ox < g.wo; ++ox) {
      const double* row = cols.data() + (oy * g.wo + ox) * g.k * g.k * g.c_in;
      for (std::size_t ky = 0; ky < g.k; ++ky) {
        const long iy = static_cast<long>(oy) * g.stride - g.pad + static_cast<long>(ky);
        if (iy < 0 || iy >= static_cast<long>(g.h)) {
          continue;
        }
        for (std::size_t kx = 0; kx < g.k; ++kx) {
          const long ix = static_cast<long>(ox) * g.stride - g.pad + static_cast<long>(kx);
          if (ix < 0 || ix >= static_cast<long>(g.w)) {
            continue;
          }
          double* d = dst.data() + (static_cast<std::size_t>(iy) * g.w +
                                    static_cast<std::size_t>(ix)) * g.c_in;
          const double* s = row + (ky * g.k + kx) * g.c_in;
          for (std::size_t c = 0; c < g.c_in; ++c) {
            d[c] += s[c];
          }
        }
      }
    }
  }
}

double logistic(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape_, double fill)
    : shape(std::move(shape_)),
      data(std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>()),
           fill) {
  check();
}

void Tensor::check() const {
  if (shape.empty() || shape.size() > 4) {
    throw InvalidArgument("Tensor: rank must be 1..4");
  }
  const auto n = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  if (n != data.size()) {
    throw InvalidArgument("Tensor: data length does not match shape");
  }
}

Grid2D conv2d(const Grid2D& input, const Tensor& kernel, std::span<const double> bias, int stride,
              int padding) {
  const auto g = geometry(input, kernel, stride, padding);
  if (!bias.empty() && bias.size() != g.c_out) {
    throw InvalidArgument("conv2d: bias length must equal c_out");
  }
  const RowMatrix cols = im2col(input, g);
  const ConstMapMatrix k(kernel.data.data(), static_cast<Eigen::Index>(g.k * g.k * g.c_in),
                         static_cast<Eigen::Index>(g.c_out));
  Grid2D out(g.ho, g.wo, g.c_out);
  MapMatrix o(out.data().data(), static_cast<Eigen::Index>(g.ho * g.wo),
              static_cast<Eigen::Index>(g.c_out));
  o.noalias() = cols * k;
  if (!bias.empty()) {
    const Eigen::Map<const Eigen::RowVectorXd> b(bias.data(), static_cast<Eigen::Index>(g.c_out));
    o.rowwise() += b;
  }
  return out;
}

Conv2dGrads conv2d_backward(const Grid2D& input, const Tensor& kernel, const Grid2D& grad_out,
                            int stride, int padding) {
  const auto g = geometry(input, kernel, stride, padding);
  if (grad_out.height() != g.ho || grad_out.width() != g.wo || grad_out.channels() != g.c_out) {
    throw InvalidArgument("conv2d_backward: grad_out shape mismatch");
  }
  const RowMatrix cols = im2col(input, g);
  const ConstMapMatrix k(kernel.data.data(), static_cast<Eigen::Index>(g.k * g.k * g.c_in),
                         static_cast<Eigen::Index>(g.c_out));
  const ConstMapMatrix go(grad_out.data().data(), static_cast<Eigen::Index>(g.ho * g.wo),
                          static_cast<Eigen::Index>(g.c_out));
  Conv2dGrads out{Grid2D(g.h, g.w, g.c_in), Tensor(kernel.shape), std::vector<double>(g.c_out)};
  MapMatrix gk(out.kernel.data.data(), static_cast<Eigen::Index>(g.k * g.k * g.c_in),
               static_cast<Eigen::Index>(g.c_out));
  gk.noalias() = cols.transpose() * go;
  Eigen::Map<Eigen::RowVectorXd>(out.bias.data(), static_cast<Eigen::Index>(g.c_out)) =
      go.colwise().sum();
  const RowMatrix gcols = go * k.transpose();
  col2im(gcols, g, out.input);
  return out;
}

double activate(double x, Activation kind) {
  switch (kind) {
    case Activation::kNone:
      return x;
    case Activation::kLeakyRelu:
      return x >= 0.0 ? x : kLeakySlope * x;
    case Activation::kLogistic:
      return logistic(x);
    case Activation::kTanh:
      return std::tanh(x);
  }
  return x;
}

double activate_derivative(double x, Activation kind) {
  switch (kind) {
    case Activation::kNone:
      return 1.0;
    case Activation::kLeakyRelu:
      return x >= 0.0 ? 1.0 : kLeakySlope;
    case Activation::kLogistic: {
      const double s = logistic(x);
      return s * (1.0 - s);
    }
    case Activation::kTanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

Grid2D activate(const Grid2D& x, Activation kind) {
  Grid2D y = x;
  for (double& v : y.data()) {
    v = activate(v, kind);
  }
  return y;
}

Grid2D activate_backward(const Grid2D& x, const Grid2D& grad_out, Activation kind) {
  if (!x.same_shape(grad_out)) {
    throw InvalidArgument("activate_backward: shape mismatch");
  }
  Grid2D g = grad_out;
  const auto xs = x.data();
  auto gs = g.data();
  for (std::size_t i = 0; i < gs.size(); ++i) {
    gs[i] *= activate_derivative(xs[i], kind);
  }
  return g;
}

Grid2D maxpool2d_3x3_same(const Grid2D& x) {
  Grid2D out(x.height(), x.width(), x.channels());
  const long h = static_cast<long>(x.height());
  const long w = static_cast<long>(x.width());
  for (long r = 0; r < h; ++r) {
    for (long c = 0; c < w; ++c) {
      for (std::size_t ch = 0; ch < x.channels(); ++ch) {
        double m = x.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c), ch);
        for (long dr = -1; dr <= 1; ++dr) {
          for (long dc = -1; dc <= 1; ++dc) {
            const long rr = r + dr;
            const long cc = c + dc;
            if (rr >= 0 && rr < h && cc >= 0 && cc < w) {
              m = std::max(m, x.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc), ch));
            }
          }
        }
        out.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c), ch) = m;
      }
    }
  }
  return out;
}

Conv2d::Conv2d(std::string name, std::size_t k, std::size_t c_in, std::size_t c_out, int stride,
               int padding)
    : weight_{name + ".weight", Tensor({k, k, c_in, c_out}), Tensor({k, k, c_in, c_out})},
      bias_{name + ".bias", Tensor({c_out}), Tensor({c_out})},
      stride_(stride),
      padding_(padding) {}

void Conv2d::init(Rng& rng) {
  const auto& s = weight_.value.shape;
  const double bound = 1.0 / std::sqrt(static_cast<double>(s[0] * s[1] * s[2]));
  for (double& v : weight_.value.data) {
    v = rng.uniform(-bound, bound);
  }
  for (double& v : bias_.value.data) {
    v = rng.uniform(-bound, bound);
  }
}

Grid2D Conv2d::forward(const Grid2D& input) {
  input_ = input;
  return conv2d(input, weight_.value, bias_.value.data, stride_, padding_);
}

Grid2D Conv2d::backward(const Grid2D& grad_out) {
  auto g = conv2d_backward(input_, weight_.value, grad_out, stride_, padding_);
  for (std::size_t i = 0; i < g.kernel.data.size(); ++i) {
    weight_.grad.data[i] += g.kernel.data[i];
  }
  for (std::size_t i = 0; i < g.bias.size(); ++i) {
    bias_.grad.data[i] += g.bias[i];
  }
  return std::move(g.input);
}

std::vector<BranchSpec> HeadSpec::branches() const {
  using A = Activation;
  const std::vector<A> heat(num_classes, A::kLogistic);
  if (variant == HeadVariant::kMerge) {
    return {{"center", heat},
            {"box", {A::kLogistic, A::kLogistic, A::kNone, A::kNone, A::kNone, A::kNone, A::kTanh,
                     A::kTanh}},
            {"corner", heat}};
  }
  return {{"center", heat},
          {"offset", {A::kLogistic, A::kLogistic}},
          {"z", {A::kNone}},
          {"size", {A::kNone, A::kNone, A::kNone}},
          {"direction", {A::kTanh, A::kTanh}},
          {"corner", heat}};
}

void HeadSpec::validate() const {
  if (variant != HeadVariant::kSplit && variant != HeadVariant::kMerge) {
    throw InvalidArgument("HeadSpec: invalid variant");
  }
  if (in_channels == 0 || hidden == 0 || num_classes == 0) {
    throw InvalidArgument("HeadSpec: channel counts must be positive");
  }
}

Head::Head(const HeadSpec& spec) : spec_(spec) {
  spec_.validate();
  for (const auto& b : spec_.branches()) {
    branches_.push_back(Branch{b, Conv2d("head." + b.name + ".conv3", 3, spec_.in_channels,
                                         spec_.hidden, 1, 1),
                               Conv2d("head." + b.name + ".conv1", 1, spec_.hidden,
                                      b.activations.size(), 1, 0),
                               {},
                               {}});
  }
}

void Head::init(Rng& rng, double heat_prior) {
  const double prior_bias = std::log(heat_prior / (1.0 - heat_prior));
  for (auto& b : branches_) {
    b.conv3.init(rng);
    b.conv1.init(rng);
    if (b.spec.name == "center" || b.spec.name == "corner") {
      for (double& v : b.conv1.bias().value.data) {
        v = prior_bias;
      }
    }
  }
}

std::vector<Grid2D> Head::forward(const Grid2D& features) {
  std::vector<Grid2D> outs;
  outs.reserve(branches_.size());
  for (auto& b : branches_) {
    b.hidden_pre = b.conv3.forward(features);
    b.out_pre = b.conv1.forward(activate(b.hidden_pre, Activation::kLeakyRelu));
    Grid2D y = b.out_pre;
    const std::size_t nch = y.channels();
    auto d = y.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      d[i] = activate(d[i], b.spec.activations[i % nch]);
    }
    outs.push_back(std::move(y));
  }
  return outs;
}

Grid2D Head::backward(const std::vector<Grid2D>& grad_outputs) {
  if (grad_outputs.size() != branches_.size()) {
    throw InvalidArgument("Head::backward: expected one gradient per branch");
  }
  Grid2D grad_features;
  for (std::size_t bi = 0; bi < branches_.size(); ++bi) {
    auto& b = branches_[bi];
    Grid2D g = grad_outputs[bi];
    if (!g.same_shape(b.out_pre)) {
      throw InvalidArgument("Head::backward: gradient shape mismatch for branch " + b.spec.name);
    }
    const std::size_t nch = g.channels();
    auto gd = g.data();
    const auto xd = b.out_pre.data();
    for (std::size_t i = 0; i < gd.size(); ++i) {
      gd[i] *= activate_derivative(xd[i], b.spec.activations[i % nch]);
    }
    const Grid2D g_hidden =
        activate_backward(b.hidden_pre, b.conv1.backward(g), Activation::kLeakyRelu);
    Grid2D g_in = b.conv3.backward(g_hidden);
    if (bi == 0) {
      grad_features = std::move(g_in);
    } else {
      auto dst = grad_features.data();
      const auto src = g_in.data();
      for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] += src[i];
      }
    }
  }
  return grad_features;
}

namespace {

Grid2D slice_channels(const Grid2D& g, std::size_t first, std::size_t count) {
  Grid2D out(g.height(), g.width(), count);
  for (std::size_t r = 0; r < g.height(); ++r) {
    for (std::size_t c = 0; c < g.width(); ++c) {
      for (std::size_t k = 0; k < count; ++k) {
        out.at(r, c, k) = g.at(r, c, first + k);
      }
    }
  }
  return out;
}

void put_channels(Grid2D& dst, const Grid2D& src, std::size_t first) {
  for (std::size_t r = 0; r < src.height(); ++r) {
    for (std::size_t c = 0; c < src.width(); ++c) {
      for (std::size_t k = 0; k < src.channels(); ++k) {
        dst.at(r, c, first + k) = src.at(r, c, k);
      }
    }
  }
}

}  // namespace

HeadMaps Head::to_maps(const std::vector<Grid2D>& o) const {
  if (spec_.variant == HeadVariant::kMerge) {
    return {o[0], o[2], slice_channels(o[1], 0, 2), slice_channels(o[1], 2, 1),
            slice_channels(o[1], 3, 3), slice_channels(o[1], 6, 2)};
  }
  return {o[0], o[5], o[1], o[2], o[3], o[4]};
}

std::vector<Grid2D> Head::from_maps(const HeadMaps& g) const {
  if (spec_.variant == HeadVariant::kMerge) {
    Grid2D box(g.rows(), g.cols(), 8);
    put_channels(box, g.offset, 0);
    put_channels(box, g.z, 2);
    put_channels(box, g.size, 3);
    put_channels(box, g.direction, 6);
    return {g.center, box, g.corner};
  }
  return {g.center, g.offset, g.z, g.size, g.direction, g.corner};
}

std::vector<Param*> Head::params() {
  std::vector<Param*> out;
  for (auto& b : branches_) {
    out.insert(out.end(), {&b.conv3.weight(), &b.conv3.bias(), &b.conv1.weight(),
                           &b.conv1.bias()});
  }
  return out;
}

void BackboneSpec::validate() const {
  if (in_channels == 0 || widths.empty()) {
    throw InvalidArgument("BackboneSpec: need input channels and at least one block");
  }
  for (auto w : widths) {
    if (w == 0) {
      throw InvalidArgument("BackboneSpec: zero width");
    }
  }
}

Backbone::Backbone(const BackboneSpec& spec) : spec_(spec) {
  spec_.validate();
  std::size_t c = spec_.in_channels;
  for (std::size_t i = 0; i < spec_.widths.size(); ++i) {
    convs_.emplace_back("backbone.down" + std::to_string(i), 3, c, spec_.widths[i], 2, 1);
    c = spec_.widths[i];
  }
  for (std::size_t i = 0; i < spec_.extra_blocks; ++i) {
    convs_.emplace_back("backbone.block" + std::to_string(i), 3, c, c, 1, 1);
  }
}

void Backbone::init(Rng& rng) {
  for (auto& c : convs_) {
    c.init(rng);
  }
}

Grid2D Backbone::forward(const Grid2D& input) {
  pre_.clear();
  Grid2D x = input;
  for (auto& c : convs_) {
    pre_.push_back(c.forward(x));
    x = activate(pre_.back(), Activation::kLeakyRelu);
  }
  return x;
}

Grid2D Backbone::backward(const Grid2D& grad_out) {
  Grid2D g = grad_out;
  for (std::size_t i = convs_.size(); i-- > 0;) {
    g = convs_[i].backward(activate_backward(pre_[i], g, Activation::kLeakyRelu));
  }
  return g;
}

std::vector<Param*> Backbone::params() {
  std::vector<Param*> out;
  for (auto& c : convs_) {
    out.push_back(&c.weight());
    out.push_back(&c.bias());
  }
  return out;
}

Detector::Detector(const BackboneSpec& backbone, const HeadSpec& head)
    : backbone_(backbone), head_(head) {
  if (backbone.out_channels() != head.in_channels) {
    throw InvalidArgument("Detector: backbone output channels do not match head input");
  }
}

void Detector::init(std::uint64_t seed) {
  Rng rng(seed);
  backbone_.init(rng);
  head_.init(rng);
}

HeadMaps Detector::forward(const Grid2D& bev) {
  return head_.to_maps(head_.forward(backbone_.forward(bev)));
}

void Detector::backward(const HeadMaps& grads) {
  backbone_.backward(head_.backward(head_.from_maps(grads)));
}

std::vector<Param*> Detector::params() {
  auto out = backbone_.params();
  const auto h = head_.params();
  out.insert(out.end(), h.begin(), h.end());
  return out;
}

void Detector::zero_grad() {
  for (auto* p : params()) {
    std::fill(p->grad.data.begin(), p->grad.data.end(), 0.0);
  }
}

std::size_t Detector::parameter_count() {
  std::size_t n = 0;
  for (auto* p : params()) {
    n += p->value.size();
  }
  return n;
}

void adamw_step(std::span<Param* const> params, AdamWState& state, const AdamWConfig& cfg) {
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->value.shape);
      state.v.emplace_back(p->value.shape);
    }
  }
  if (state.m.size() != params.size()) {
    throw InvalidArgument("adamw_step: optimizer state does not match parameters");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    auto& m = state.m[i].data;
    auto& v = state.v[i].data;
    if (m.size() != p.value.size() || p.grad.size() != p.value.size()) {
      throw InvalidArgument("adamw_step: shape mismatch for " + p.name);
    }
    for (std::size_t j = 0; j < m.size(); ++j) {
      const double g = p.grad.data[j];
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      double& w = p.value.data[j];
      w -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
      w -= cfg.lr * cfg.weight_decay * w;
    }
  }
}

void OneCycleConfig::validate() const {
  if (!(max_lr > 0.0) || !(div_factor > 0.0) || !(final_div_factor > 0.0) ||
      !(warm_fraction > 0.0 && warm_fraction < 1.0) || total_steps == 0) {
    throw InvalidArgument("OneCycleConfig: invalid parameters");
  }
}

ScheduleValue one_cycle(std::size_t step, const OneCycleConfig& cfg) {
  cfg.validate();
  if (step > cfg.total_steps) {
    throw InvalidArgument("one_cycle: step " + std::to_string(step) + " beyond total " +
                          std::to_string(cfg.total_steps));
  }
  const double start_lr = cfg.max_lr / cfg.div_factor;
  const double end_lr = start_lr / cfg.final_div_factor;
  const double warm = cfg.warm_fraction * static_cast<double>(cfg.total_steps);
  const double s = static_cast<double>(step);
  // Cosine interpolation from a (progress 0) to b (progress 1).
  auto cos_interp = [](double a, double b, double progress) {
    return b + 0.5 * (a - b) * (1.0 + std::cos(kPi * progress));
  };
  if (s <= warm) {
    const double p = s / warm;
    return {cos_interp(start_lr, cfg.max_lr, p),
            cos_interp(cfg.momentum_max, cfg.momentum_min, p)};
  }
  const double p = (s - warm) / (static_cast<double>(cfg.total_steps) - warm);
  return {cos_interp(cfg.max_lr, end_lr, p), cos_interp(cfg.momentum_min, cfg.momentum_max, p)};
}

void save_checkpoint(const std::filesystem::path& dir, std::span<Param* const> params,
                     const KeyValues& header) {
  std::filesystem::create_directories(dir);
  std::ostringstream manifest;
  for (const auto& [k, v] : header.entries()) {
    manifest << k << ' ' << v << '\n';
  }
  for (const auto* p : params) {
    manifest << "param " << p->name << ' ' << p->value.shape.size();
    for (auto d : p->value.shape) {
      manifest << ' ' << d;
    }
    manifest << '\n';
    std::vector<char> payload;
    append_f32_le(payload, p->value.data);
    write_file_bytes(dir / (p->name + ".f32"), payload);
  }
  write_file_text(dir / "manifest.txt", manifest.str());
}

KeyValues load_checkpoint(const std::filesystem::path& dir, std::span<Param* const> params) {
  std::istringstream is(read_file_text(dir / "manifest.txt"));
  KeyValues header;
  std::string line;
  std::size_t next = 0;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) {
      continue;
    }
    if (key != "param") {
      std::string value;
      std::getline(ls >> std::ws, value);
      header.set(key, value);
      continue;
    }
    std::string name;
    std::size_t ndim = 0;
    ls >> name >> ndim;
    std::vector<std::size_t> shape(ndim);
    for (auto& d : shape) {
      ls >> d;
    }
    if (!ls || next >= params.size()) {
      throw ParseError("checkpoint manifest: unexpected parameter entry '" + line + "'");
    }
    Param& p = *params[next++];
    if (p.name != name || p.value.shape != shape) {
      throw InvalidArgument("checkpoint: parameter '" + name +
                            "' does not match the configured model (expected '" + p.name + "')");
    }
    auto values = decode_f32_le(read_file_bytes(dir / (name + ".f32")));
    if (values.size() != p.value.size()) {
      throw ParseError("checkpoint: payload size mismatch for " + name);
    }
    p.value.data = std::move(values);
  }
  if (next != params.size()) {
    throw InvalidArgument("checkpoint: holds " + std::to_string(next) + " parameters, model has " +
                          std::to_string(params.size()));
  }
  return header;
}

}  // namespace cn3d::nn
