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

#include "cn3d/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "cn3d/error.hpp"
#include "cn3d/grid_io.hpp"
#include "cn3d/rng.hpp"

namespace cn3d {

namespace fs = std::filesystem;

namespace {

constexpr const char* kDefaults = R"(# Desk-scale defaults.
seed = 7

grid.x_range = 0 12.8
grid.y_range = -6.4 6.4
grid.z_range = -3 1
grid.voxel = 0.1 0.1 0.1
grid.downsample = 4
grid.voxel_cap = 5

scene.classes = Car
scene.boxes_min = 1
scene.boxes_max = 3
scene.x_range = 0 12.8
scene.y_range = -6.4 6.4
scene.ground_z = -1.7
scene.points_min = 150
scene.points_max = 400
scene.clutter_density = 0.5

encoder.min_overlap = 0.01

loss.alpha = 2
loss.beta = 4
loss.a = 0.5
loss.gamma = 1.5
loss.w_cls = 0.5
loss.w_off = 1
loss.w_z = 1
loss.w_size = 1
loss.w_dir = 1
loss.w_cor = 0.1
loss.w_decode = 0.5
loss.size_loss = balanced
loss.decode_average_corners = false

infer.threshold = 0.1
infer.max_detections = 50
infer.kswarp = true
infer.corners = true

model.head = split
model.hidden = 64
model.backbone_widths = 16 32
model.extra_blocks = 1

train.scenes = 50
train.val_scenes = 20
train.batch_size = 2
train.steps = 600
train.max_lr = 0.01
train.div_factor = 10
train.final_div_factor = 10000
train.momentum = 0.95 0.85
train.warm_fraction = 0.3
train.weight_decay = 0.01
train.augment = true
train.eval_iou = 0.5

ablation.corners = true
ablation.decode_loss = true
)";

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void log_kv(std::ostream& log, std::initializer_list<std::pair<const char*, std::string>> fields) {
  bool first = true;
  for (const auto& [k, v] : fields) {
    log << (first ? "" : " ") << k << '=' << v;
    first = false;
  }
  log << '\n';
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string num(std::size_t v) { return std::to_string(v); }

std::vector<LabelRecord> scene_records(const LabeledScene& scene, const ClassNames& names) {
  std::vector<LabelRecord> recs;
  for (std::size_t i = 0; i < scene.boxes.size(); ++i) {
    const int c = scene.classes[i];
    if (c < 0 || static_cast<std::size_t>(c) >= names.size()) {
      throw InvalidArgument("write_scene: class id out of range");
    }
    recs.push_back({names[static_cast<std::size_t>(c)], scene.boxes[i], std::nullopt});
  }
  return recs;
}

std::vector<std::string> ids_with_extension(const fs::path& dir, const std::string& ext) {
  std::vector<std::string> ids;
  if (!fs::is_directory(dir)) {
    return ids;
  }
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ext) {
      ids.push_back(e.path().stem().string());
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

void require_dir(const fs::path& p, const char* what) {
  if (!fs::is_directory(p)) {
    throw InvalidArgument(std::string(what) + " directory not found: " + p.string());
  }
}

// One frame's network input and targets.
struct Sample {
  Grid2D input;
  TargetSet targets;
};

Sample make_sample(const LabeledScene& scene, const RunConfig& cfg) {
  const LabeledScene cropped = crop_to_grid(scene, cfg.grid);
  return {network_input(cropped.cloud, cfg.grid),
          encode_targets(cropped.boxes, cropped.classes, cfg.encoder())};
}

double sample_loss(nn::Detector& det, const Sample& s, const RunConfig& cfg,
                   const LossConfig& loss, LossReport* report_out) {
  const HeadMaps pred = det.forward(s.input);
  LossReport rep = compute_losses(pred, s.targets, cfg.grid, loss);
  const double total = total_loss(rep, loss);
  if (report_out != nullptr) {
    *report_out = std::move(rep);
  }
  return total;
}

double mean_loss(nn::Detector& det, const std::vector<Sample>& samples, const RunConfig& cfg,
                 const LossConfig& loss) {
  double sum = 0.0;
  for (const auto& s : samples) {
    sum += sample_loss(det, s, cfg, loss, nullptr);
  }
  return samples.empty() ? 0.0 : sum / static_cast<double>(samples.size());
}

void scale_maps(HeadMaps& m, double s) {
  for (Grid2D* g : {&m.center, &m.corner, &m.offset, &m.z, &m.size, &m.direction}) {
    for (double& v : g->data()) {
      v *= s;
    }
  }
}

EvalConfig eval_config(const RunConfig& cfg, std::optional<double> uniform_iou = std::nullopt) {
  EvalConfig e = default_eval_config(cfg.class_names(), IouMode::kBev);
  if (uniform_iou) {
    std::fill(e.thresholds.begin(), e.thresholds.end(), *uniform_iou);
  } else if (!cfg.eval_thresholds.empty()) {
    if (cfg.eval_thresholds.size() != e.thresholds.size()) {
      throw InvalidArgument("eval.iou needs one threshold per class");
    }
    e.thresholds = cfg.eval_thresholds;
  }
  return e;
}

std::vector<Detection> run_model(nn::Detector& det, const PointCloud& cloud, const RunConfig& cfg) {
  const bool any_inside = std::any_of(cloud.points.begin(), cloud.points.end(), [&](const Point& p) {
    return cfg.grid.contains_xy(p.x, p.y) && p.z >= cfg.grid.z_min && p.z < cfg.grid.z_max;
  });
  if (!any_inside) {
    return {};
  }
  return detect(det.forward(network_input(cloud, cfg.grid)), cfg.grid, cfg.effective_infer())
      .detections;
}

}  // namespace

// --- RunConfig ------------------------------------------------------------------

EncoderConfig RunConfig::encoder() const {
  return {grid, static_cast<int>(scene.classes.size()), min_overlap};
}

nn::HeadSpec RunConfig::head_spec() const {
  nn::HeadSpec h;
  h.variant = head_variant;
  h.in_channels = backbone.out_channels();
  h.hidden = head_hidden;
  h.num_classes = scene.classes.size();
  return h;
}

LossConfig RunConfig::effective_loss() const {
  LossConfig l = loss;
  if (!use_corners) {
    l.w_cor = 0.0;
  }
  if (!use_decode_loss) {
    l.w_decode = 0.0;
  }
  return l;
}

InferConfig RunConfig::effective_infer() const {
  InferConfig i = infer;
  i.use_corners = infer.use_corners && use_corners;
  return i;
}

void RunConfig::validate() const {
  grid.validate();
  scene.validate();
  loss.validate();
  infer.validate();
  backbone.validate();
  head_spec().validate();
  encoder().validate();
  if (backbone.in_channels != kBevChannels) {
    throw InvalidArgument("backbone input must have " + std::to_string(kBevChannels) +
                          " channels");
  }
  if ((std::size_t{1} << backbone.widths.size()) != static_cast<std::size_t>(grid.downsample)) {
    throw InvalidArgument("model.backbone_widths: one stride-2 block per factor of 2 in "
                          "grid.downsample is required");
  }
  if (train_scenes < 1 || batch_size < 1) {
    throw InvalidArgument("train.scenes and train.batch_size must be >= 1");
  }
  if (!(eval_iou > 0.0 && eval_iou <= 1.0)) {
    throw InvalidArgument("train.eval_iou must lie in (0, 1]");
  }
  if (!(weight_decay >= 0.0)) {
    throw InvalidArgument("train.weight_decay must be non-negative");
  }
  if (schedule.total_steps > 0) {
    schedule.validate();
  }
}

RunConfig run_config_from_kv(const KeyValues& user) {
  KeyValues kv = KeyValues::parse(kDefaults, "defaults");
  kv.merge(user);

  RunConfig c;
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", 7));
  c.grid = grid_config_from_kv(kv, "grid.");
  c.scene = scene_spec_from_kv(kv, "scene.");
  c.min_overlap = kv.get_double("encoder.min_overlap", c.min_overlap);
  c.loss = loss_config_from_kv(kv, "loss.");
  c.infer = infer_config_from_kv(kv, "infer.");

  const auto head = kv.get_string("model.head", "split");
  if (head == "split") {
    c.head_variant = nn::HeadVariant::kSplit;
  } else if (head == "merge") {
    c.head_variant = nn::HeadVariant::kMerge;
  } else {
    throw InvalidArgument("model.head must be 'split' or 'merge'");
  }
  const auto hidden = kv.get_int("model.hidden", 64);
  const auto extra = kv.get_int("model.extra_blocks", 0);
  if (hidden < 1 || extra < 0) {
    throw InvalidArgument("model.hidden must be >= 1 and model.extra_blocks >= 0");
  }
  c.head_hidden = static_cast<std::size_t>(hidden);
  c.backbone.in_channels = kBevChannels;
  c.backbone.widths.clear();
  for (double w : kv.get_doubles("model.backbone_widths", {16, 32})) {
    if (!(w >= 1.0) || w != std::floor(w)) {
      throw InvalidArgument("model.backbone_widths must be positive integers");
    }
    c.backbone.widths.push_back(static_cast<std::size_t>(w));
  }
  if (c.backbone.widths.empty()) {
    throw InvalidArgument("model.backbone_widths must not be empty");
  }
  c.backbone.extra_blocks = static_cast<std::size_t>(extra);

  const auto count = [&](const char* key, long long fallback) {
    const auto v = kv.get_int(key, fallback);
    if (v < 0) {
      throw InvalidArgument(std::string(key) + " must be non-negative");
    }
    return static_cast<std::size_t>(v);
  };
  c.train_scenes = count("train.scenes", 50);
  c.val_scenes = count("train.val_scenes", 20);
  c.batch_size = count("train.batch_size", 2);
  c.schedule.total_steps = count("train.steps", 200);
  c.schedule.max_lr = kv.get_double("train.max_lr", c.schedule.max_lr);
  c.schedule.div_factor = kv.get_double("train.div_factor", c.schedule.div_factor);
  c.schedule.final_div_factor = kv.get_double("train.final_div_factor", c.schedule.final_div_factor);
  const auto mom = kv.get_doubles("train.momentum", {0.95, 0.85});
  if (mom.size() != 2) {
    throw InvalidArgument("train.momentum needs two values: max min");
  }
  c.schedule.momentum_max = mom[0];
  c.schedule.momentum_min = mom[1];
  c.schedule.warm_fraction = kv.get_double("train.warm_fraction", c.schedule.warm_fraction);
  c.weight_decay = kv.get_double("train.weight_decay", c.weight_decay);
  c.augment = kv.get_bool("train.augment", c.augment);
  c.eval_iou = kv.get_double("train.eval_iou", c.eval_iou);

  c.use_corners = kv.get_bool("ablation.corners", true);
  c.use_decode_loss = kv.get_bool("ablation.decode_loss", true);
  c.eval_thresholds = kv.get_doubles("eval.iou", {});

  kv.reject_unknown("config");
  c.validate();
  return c;
}

std::string default_config_text() { return kDefaults; }

// --- Dataset layout ----------------------------------------------------------------

std::string scene_id(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06zu", index);
  return buf;
}

std::uint64_t scene_seed(std::uint64_t base, int split, std::size_t index) {
  return splitmix(splitmix(base) ^ (static_cast<std::uint64_t>(split) << 40) ^
                  static_cast<std::uint64_t>(index));
}

std::vector<std::string> list_scene_ids(const fs::path& dir) {
  auto ids = ids_with_extension(dir / "velodyne", ".bin");
  const auto labels = ids_with_extension(dir / "labels", ".txt");
  ids.insert(ids.end(), labels.begin(), labels.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

void write_scene(const fs::path& dir, const std::string& id, const LabeledScene& scene,
                 const ClassNames& names) {
  fs::create_directories(dir / "velodyne");
  fs::create_directories(dir / "labels");
  save_kitti_bin(dir / "velodyne" / (id + ".bin"), scene.cloud);
  write_file_text(dir / "labels" / (id + ".txt"), format_labels(scene_records(scene, names)));
}

LabeledScene read_scene(const fs::path& dir, const std::string& id, const ClassNames& names) {
  LabeledScene scene;
  const auto bin = dir / "velodyne" / (id + ".bin");
  const auto txt = dir / "labels" / (id + ".txt");
  if (fs::exists(txt)) {
    scene = labels_to_scene(parse_labels(read_file_text(txt)), names);
  }
  if (fs::exists(bin)) {
    scene.cloud = load_kitti_bin(bin);
  }
  return scene;
}

// --- Model plumbing -----------------------------------------------------------------

Grid2D network_input(const PointCloud& cloud, const GridConfig& grid) {
  return bev_collapse(voxelize_mean(cloud, grid), 1);
}

LabeledScene crop_to_grid(const LabeledScene& scene, const GridConfig& grid) {
  LabeledScene out;
  out.cloud = scene.cloud;
  for (std::size_t i = 0; i < scene.boxes.size(); ++i) {
    if (grid.contains_xy(scene.boxes[i].cx, scene.boxes[i].cy)) {
      out.boxes.push_back(scene.boxes[i]);
      out.classes.push_back(scene.classes[i]);
    }
  }
  return out;
}

nn::Detector make_detector(const RunConfig& cfg) {
  return nn::Detector(cfg.backbone, cfg.head_spec());
}

KeyValues checkpoint_header(const RunConfig& cfg) {
  KeyValues h;
  h.set("model.head", cfg.head_variant == nn::HeadVariant::kSplit ? "split" : "merge");
  h.set("model.hidden", std::to_string(cfg.head_hidden));
  h.set("model.extra_blocks", std::to_string(cfg.backbone.extra_blocks));
  h.set("scene.classes", [&] {
    std::string s;
    for (const auto& n : cfg.class_names()) {
      s += (s.empty() ? "" : ",") + n;
    }
    return s;
  }());
  h.set("seed", std::to_string(cfg.seed));
  return h;
}

// --- Commands -------------------------------------------------------------------------

void cmd_synth(const RunConfig& cfg, const SynthOptions& opt, std::ostream& log) {
  const auto names = cfg.class_names();
  for (std::size_t i = 0; i < opt.count; ++i) {
    const LabeledScene scene = synth_scene(cfg.scene, scene_seed(cfg.seed, 2, i));
    const auto id = scene_id(i);
    write_scene(opt.out, id, scene, names);
    log_kv(log, {{"event", "synth"}, {"id", id}, {"boxes", num(scene.boxes.size())},
                 {"points", num(scene.cloud.points.size())}});
  }
}

void cmd_encode(const RunConfig& cfg, const EncodeOptions& opt, std::ostream& log) {
  const auto names = cfg.class_names();
  const LabeledScene labels =
      labels_to_scene(parse_labels(read_file_text(opt.labels)), names);
  const LabeledScene scene = crop_to_grid(labels, cfg.grid);
  if (scene.boxes.size() != labels.boxes.size()) {
    log_kv(log, {{"event", "warning"},
                 {"skipped_outside_grid", num(labels.boxes.size() - scene.boxes.size())}});
  }
  const TargetSet ts = encode_targets(scene.boxes, scene.classes, cfg.encoder());
  save_targets(opt.out, ts);
  for (const auto& w : ts.warnings) {
    log << "event=warning message=\"" << w << "\"\n";
  }
  if (opt.cloud) {
    const VoxelGrid vg = voxelize_mean(load_kitti_bin(*opt.cloud), cfg.grid);
    save_grid(opt.out / "bev.grid", bev_collapse(vg));
    save_grid(opt.out / "input.grid", bev_collapse(vg, 1));
    log_kv(log, {{"event", "voxelize"}, {"voxels", num(vg.occupied.size())},
                 {"retained_points", num(vg.retained_points())},
                 {"dropped_out_of_range", num(vg.dropped_out_of_range)},
                 {"dropped_over_cap", num(vg.dropped_over_cap)}});
  }
  log_kv(log, {{"event", "encode"}, {"positives", num(ts.positives.size())},
               {"rows", num(ts.maps.rows())}, {"cols", num(ts.maps.cols())},
               {"out", opt.out.string()}});
}

TrainResult cmd_train_toy(const RunConfig& base, const TrainOptions& opt, std::ostream& log) {
  RunConfig cfg = base;
  if (opt.steps) {
    cfg.schedule.total_steps = *opt.steps;
  }
  cfg.validate();
  const LossConfig loss = cfg.effective_loss();

  std::vector<LabeledScene> train_scenes;
  std::vector<Sample> train;
  std::vector<Sample> val;
  for (std::size_t i = 0; i < cfg.train_scenes; ++i) {
    train_scenes.push_back(synth_scene(cfg.scene, scene_seed(cfg.seed, 0, i)));
    train.push_back(make_sample(train_scenes.back(), cfg));
  }
  std::vector<LabeledScene> val_scenes;
  for (std::size_t i = 0; i < cfg.val_scenes; ++i) {
    val_scenes.push_back(crop_to_grid(synth_scene(cfg.scene, scene_seed(cfg.seed, 1, i)), cfg.grid));
  }

  nn::Detector det = make_detector(cfg);
  det.init(cfg.seed);
  const auto params = det.params();
  log_kv(log, {{"event", "setup"}, {"train_scenes", num(train.size())},
               {"val_scenes", num(val_scenes.size())}, {"parameters", num(det.parameter_count())},
               {"steps", num(cfg.schedule.total_steps)}, {"batch", num(cfg.batch_size)}});

  TrainResult result;
  result.initial_loss = mean_loss(det, train, cfg, loss);
  if (!std::isfinite(result.initial_loss)) {
    throw Error("non-finite loss at step 0 (initial evaluation)");
  }
  log_kv(log, {{"event", "initial"}, {"mean_loss", num(result.initial_loss)}});

  Rng rng(splitmix(cfg.seed ^ 0x7261696eULL));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();
  std::size_t epoch = 0;
  double epoch_sum = 0.0;
  std::size_t epoch_count = 0;
  nn::AdamWState state;

  for (std::size_t step = 0; step < cfg.schedule.total_steps; ++step) {
    const auto sched = nn::one_cycle(step, cfg.schedule);
    det.zero_grad();
    double batch_loss = 0.0;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      if (cursor == order.size()) {
        if (epoch_count > 0) {
          log_kv(log, {{"event", "epoch"}, {"epoch", num(epoch)},
                       {"mean_loss", num(epoch_sum / static_cast<double>(epoch_count))}});
          ++epoch;
        }
        epoch_sum = 0.0;
        epoch_count = 0;
        for (std::size_t i = order.size(); i > 1; --i) {
          std::swap(order[i - 1], order[static_cast<std::size_t>(
                                      rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
        }
        cursor = 0;
      }
      const std::size_t idx = order[cursor++];
      Sample augmented;
      const Sample* sample = &train[idx];
      if (cfg.augment) {
        augmented = make_sample(augment_global(train_scenes[idx], sample_augment(rng)), cfg);
        sample = &augmented;
      }
      LossReport rep;
      const double l = sample_loss(det, *sample, cfg, loss, &rep);
      if (!std::isfinite(l)) {
        throw Error("non-finite loss at step " + std::to_string(step));
      }
      scale_maps(rep.grad, 1.0 / static_cast<double>(cfg.batch_size));
      det.backward(rep.grad);
      batch_loss += l / static_cast<double>(cfg.batch_size);
      epoch_sum += l;
      ++epoch_count;
    }
    nn::adamw_step(params, state,
                   {sched.lr, sched.momentum, 0.999, 1e-8, cfg.weight_decay});
    result.step_losses.push_back(batch_loss);
    log_kv(log, {{"event", "step"}, {"step", num(step)}, {"lr", num(sched.lr)},
                 {"momentum", num(sched.momentum)}, {"loss", num(batch_loss)}});
  }

  result.final_loss = mean_loss(det, train, cfg, loss);
  if (!std::isfinite(result.final_loss)) {
    throw Error("non-finite loss after step " + std::to_string(cfg.schedule.total_steps));
  }

  std::vector<Frame> frames;
  for (const auto& s : val_scenes) {
    frames.push_back({run_model(det, s.cloud, cfg), s.boxes, s.classes});
  }
  result.val_report = evaluate(frames, cfg.class_names(), eval_config(cfg, cfg.eval_iou));
  std::size_t defined = 0;
  for (const auto& r : result.val_report) {
    if (r.defined) {
      result.val_ap_bev += r.ap_bev;
      result.val_ap_3d += r.ap_3d;
      ++defined;
    }
  }
  if (defined > 0) {
    result.val_ap_bev /= static_cast<double>(defined);
    result.val_ap_3d /= static_cast<double>(defined);
  }
  log_kv(log, {{"event", "final"}, {"initial_loss", num(result.initial_loss)},
               {"final_loss", num(result.final_loss)},
               {"ratio", num(result.final_loss / result.initial_loss)},
               {"val_ap40_bev", num(result.val_ap_bev)}, {"val_ap40_3d", num(result.val_ap_3d)},
               {"eval_iou", num(cfg.eval_iou)}});

  if (opt.out) {
    fs::create_directories(*opt.out);
    KeyValues header = checkpoint_header(cfg);
    header.set("steps", std::to_string(cfg.schedule.total_steps));
    nn::save_checkpoint(*opt.out / "checkpoint", params, header);
    std::ostringstream curve;
    curve << "event=initial mean_loss=" << num(result.initial_loss) << '\n';
    for (std::size_t i = 0; i < result.step_losses.size(); ++i) {
      curve << "step=" << i << " loss=" << num(result.step_losses[i]) << '\n';
    }
    curve << "event=final mean_loss=" << num(result.final_loss) << " val_ap40_bev="
          << num(result.val_ap_bev) << " val_ap40_3d=" << num(result.val_ap_3d) << '\n';
    write_file_text(*opt.out / "loss_curve.txt", curve.str());
    write_file_text(*opt.out / "val_report.txt",
                    format_report(result.val_report, eval_config(cfg).recall_positions));
  }
  return result;
}

std::vector<Detection> oracle_detect(const LabeledScene& scene, const RunConfig& cfg) {
  const LabeledScene cropped = crop_to_grid(scene, cfg.grid);
  const TargetSet ts = encode_targets(cropped.boxes, cropped.classes, cfg.encoder());
  InferConfig icfg = cfg.effective_infer();
  icfg.threshold = 0.0;
  const DetectResult res = detect(ts.maps, cfg.grid, icfg);
  std::set<std::tuple<std::size_t, std::size_t, int>> positives;
  for (const auto& p : ts.positives) {
    positives.insert({p.row, p.col, p.cls});
  }
  std::vector<Detection> out;
  for (std::size_t i = 0; i < res.detections.size(); ++i) {
    const auto& c = res.cells[i];
    if (positives.count({c.row, c.col, c.cls}) != 0) {
      out.push_back(res.detections[i]);
    }
  }
  return out;
}

std::size_t cmd_infer(const RunConfig& cfg, const InferOptions& opt, std::ostream& log) {
  require_dir(opt.scenes, "scenes");
  const auto names = cfg.class_names();
  std::optional<nn::Detector> det;
  if (!opt.oracle_head) {
    if (!opt.checkpoint) {
      throw InvalidArgument("infer: a checkpoint is required unless --oracle-head is given");
    }
    det.emplace(make_detector(cfg));
    auto params = det->params();
    nn::load_checkpoint(*opt.checkpoint, params);
  }
  fs::create_directories(opt.out);
  const auto ids = list_scene_ids(opt.scenes);
  for (const auto& id : ids) {
    const LabeledScene scene = read_scene(opt.scenes, id, names);
    const auto dets = opt.oracle_head ? oracle_detect(scene, cfg) : run_model(*det, scene.cloud, cfg);
    write_file_text(opt.out / (id + ".txt"), format_detections(dets, names));
    log_kv(log, {{"event", "infer"}, {"id", id}, {"detections", num(dets.size())}});
  }
  return ids.size();
}

EvalOutcome cmd_eval(const RunConfig& cfg, const EvalOptions& opt) {
  require_dir(opt.detections, "detections");
  require_dir(opt.labels, "labels");
  const auto names = cfg.class_names();
  const auto det_ids = ids_with_extension(opt.detections, ".txt");
  const auto gt_ids = ids_with_extension(opt.labels, ".txt");
  if (det_ids != gt_ids) {
    std::vector<std::string> no_det;
    std::vector<std::string> no_gt;
    std::set_difference(gt_ids.begin(), gt_ids.end(), det_ids.begin(), det_ids.end(),
                        std::back_inserter(no_det));
    std::set_difference(det_ids.begin(), det_ids.end(), gt_ids.begin(), gt_ids.end(),
                        std::back_inserter(no_gt));
    std::string msg = "eval: frame sets differ;";
    msg += " missing detections:";
    for (const auto& id : no_det) {
      msg += " " + id;
    }
    msg += "; missing labels:";
    for (const auto& id : no_gt) {
      msg += " " + id;
    }
    throw InvalidArgument(msg);
  }
  std::vector<Frame> frames;
  for (const auto& id : gt_ids) {
    const LabeledScene gt =
        labels_to_scene(parse_labels(read_file_text(opt.labels / (id + ".txt"))), names);
    frames.push_back({parse_detections(read_file_text(opt.detections / (id + ".txt")), names),
                      gt.boxes, gt.classes});
  }
  const EvalConfig ecfg = eval_config(cfg);
  EvalOutcome out;
  out.report = evaluate(frames, names, ecfg);
  std::ostringstream os;
  os << "frames=" << frames.size() << '\n' << format_report(out.report, ecfg.recall_positions);
  if (opt.mtp) {
    const MtpSidecar side = parse_mtp_sidecar(read_file_text(*opt.mtp));
    double map = 0.0;
    if (side.map) {
      map = *side.map;
    } else {
      std::size_t defined = 0;
      for (const auto& r : out.report) {
        if (r.defined) {
          map += r.ap_bev;
          ++defined;
        }
      }
      map = defined > 0 ? map / static_cast<double>(defined) : 0.0;
    }
    out.nds = nds(map, side.errors);
    os << "mAP=" << num(map) << " NDS=" << num(*out.nds) << '\n';
  }
  out.text = os.str();
  return out;
}

}  // namespace cn3d
