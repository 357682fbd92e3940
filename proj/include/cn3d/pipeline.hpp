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

// Orchestration behind the command-line tool: configuration, dataset layout,
// toy training, inference, evaluation and the finite-difference gradient suite.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cn3d/config.hpp"
#include "cn3d/evalkit.hpp"
#include "cn3d/infer.hpp"
#include "cn3d/losses.hpp"
#include "cn3d/nn.hpp"
#include "cn3d/pointcloud_io.hpp"
#include "cn3d/targets.hpp"
#include "cn3d/voxelize.hpp"

namespace cn3d {

/// Everything a command needs. Defaults describe the desk-scale setup: a
/// 12.8 m x 12.8 m crop at 0.1 m voxels and stride 4 (a 32 x 32 feature map).
struct RunConfig {
  GridConfig grid;
  SceneSpec scene;
  double min_overlap = 0.01;
  LossConfig loss;
  InferConfig infer;
  nn::OneCycleConfig schedule;
  double weight_decay = 0.01;
  nn::HeadVariant head_variant = nn::HeadVariant::kSplit;
  std::size_t head_hidden = 64;
  nn::BackboneSpec backbone;

  std::uint64_t seed = 7;
  std::size_t train_scenes = 50;
  std::size_t val_scenes = 20;
  std::size_t batch_size = 2;
  bool augment = true;
  double eval_iou = 0.5;  // IoU threshold of the end-of-training report

  // Ablations. Corner module off zeroes its loss weight and restricts KSWarp
  // to the center sample; decode loss off zeroes w_decode. KSWarp itself is
  // infer.use_kswarp.
  bool use_corners = true;
  bool use_decode_loss = true;
  std::vector<double> eval_thresholds;  // per class; empty uses the class defaults

  ClassNames class_names() const { return scene.class_names(); }
  EncoderConfig encoder() const;
  nn::HeadSpec head_spec() const;
  /// Loss config after ablation toggles.
  LossConfig effective_loss() const;
  InferConfig effective_infer() const;
  void validate() const;
};

/// Builds a RunConfig from defaults overlaid with `kv`. Unknown keys are rejected.
RunConfig run_config_from_kv(const KeyValues& kv);
/// The documented keys with their default values, as config text.
std::string default_config_text();

// --- Dataset layout: <dir>/velodyne/<id>.bin and <dir>/labels/<id>.txt -------

std::vector<std::string> list_scene_ids(const std::filesystem::path& dir);
void write_scene(const std::filesystem::path& dir, const std::string& id,
                 const LabeledScene& scene, const ClassNames& names);
LabeledScene read_scene(const std::filesystem::path& dir, const std::string& id,
                        const ClassNames& names);
std::string scene_id(std::size_t index);

/// Seed of the i-th scene in a split (0 train, 1 validation).
std::uint64_t scene_seed(std::uint64_t base, int split, std::size_t index);

// --- Model plumbing ---------------------------------------------------------

/// Network input: the BEV plane at voxel resolution.
Grid2D network_input(const PointCloud& cloud, const GridConfig& grid);
/// Boxes whose centers fall outside the grid are removed.
LabeledScene crop_to_grid(const LabeledScene& scene, const GridConfig& grid);

nn::Detector make_detector(const RunConfig& cfg);
KeyValues checkpoint_header(const RunConfig& cfg);

// --- Commands ----------------------------------------------------------------

struct SynthOptions {
  std::size_t count = 10;
  std::filesystem::path out;
};
void cmd_synth(const RunConfig& cfg, const SynthOptions& opt, std::ostream& log);

struct EncodeOptions {
  std::filesystem::path labels;
  std::optional<std::filesystem::path> cloud;
  std::filesystem::path out;
};
void cmd_encode(const RunConfig& cfg, const EncodeOptions& opt, std::ostream& log);

struct TrainResult {
  double initial_loss = 0.0;   // mean total loss over the training split at init
  double final_loss = 0.0;     // same after training
  std::vector<double> step_losses;
  double val_ap_bev = 0.0;     // AP40 at cfg.eval_iou on the validation split
  double val_ap_3d = 0.0;
  std::vector<ClassReport> val_report;
};

struct TrainOptions {
  std::optional<std::size_t> steps;  // overrides schedule.total_steps
  std::optional<std::filesystem::path> out;
};

/// Deterministic given the config. Throws Error naming the step on a non-finite loss.
TrainResult cmd_train_toy(const RunConfig& cfg, const TrainOptions& opt, std::ostream& log);

struct InferOptions {
  std::filesystem::path scenes;
  std::optional<std::filesystem::path> checkpoint;
  bool oracle_head = false;
  std::filesystem::path out;
};
/// Writes <out>/<id>.txt per scene. Returns the number of scenes processed.
std::size_t cmd_infer(const RunConfig& cfg, const InferOptions& opt, std::ostream& log);

/// Decodes encoded targets in place of a network. Background cells carry no
/// box, so the threshold drops to 0 and only peaks at encoded positives are kept.
std::vector<Detection> oracle_detect(const LabeledScene& scene, const RunConfig& cfg);

struct EvalOptions {
  std::filesystem::path detections;
  std::filesystem::path labels;
  std::optional<std::filesystem::path> mtp;
};
struct EvalOutcome {
  std::vector<ClassReport> report;
  std::optional<double> nds;
  std::string text;
};
EvalOutcome cmd_eval(const RunConfig& cfg, const EvalOptions& opt);

// --- Gradient checking -----------------------------------------------------------

struct GradcheckRow {
  std::string name;
  std::size_t probes = 0;
  double worst_rel_error = 0.0;
  bool pass = false;
};

struct GradcheckOptions {
  std::uint64_t seed = 1;
  std::size_t probes = 100;
  double step = 2e-5;  // scaled by max(1, |x|)
  double tolerance = 1e-5;
};

/// Compares analytic gradients of every loss and layer with central differences.
std::vector<GradcheckRow> run_gradcheck(const GradcheckOptions& opt);
std::string format_gradcheck(const std::vector<GradcheckRow>& rows);

/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double relative_error(double analytic, double numeric);

}  // namespace cn3d
