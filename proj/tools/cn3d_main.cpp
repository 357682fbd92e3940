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

// cn3d command-line tool.
//
//   cn3d synth --out DIR [--count N]
//   cn3d encode --labels FILE [--cloud FILE] --out DIR
//   cn3d train-toy --out DIR [--steps N]
//   cn3d infer --scenes DIR (--checkpoint DIR | --oracle-head) --out DIR
//   cn3d eval --detections DIR --labels DIR [--mtp FILE]
//   cn3d gradcheck [--probes N]
//   cn3d nds (--mtp FILE | --map X --errors E1 E2 E3 E4 E5)
//   cn3d config
//
// Every command takes --config PATH, --seed N and `--key value` overrides of
// any configuration key (precedence: command line > file > defaults).

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cn3d/error.hpp"
#include "cn3d/grid_io.hpp"
#include "cn3d/pipeline.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<long long> seed;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "Flat key-value config file");
  sub->add_option("--seed", c.seed, "Seed for synthesis, initialization and sampling");
  sub->allow_extras();
}

cn3d::KeyValues overrides(const std::vector<std::string>& extras) {
  cn3d::KeyValues kv;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& a = extras[i];
    if (a.rfind("--", 0) != 0 || a.size() < 3) {
      throw cn3d::InvalidArgument("unexpected argument '" + a + "'");
    }
    const auto eq = a.find('=');
    if (eq != std::string::npos) {
      kv.set(a.substr(2, eq - 2), a.substr(eq + 1));
    } else if (i + 1 < extras.size()) {
      kv.set(a.substr(2), extras[++i]);
    } else {
      throw cn3d::InvalidArgument("override '" + a + "' needs a value");
    }
  }
  return kv;
}

cn3d::RunConfig load_config(const Common& c, const CLI::App* sub) {
  cn3d::KeyValues kv;
  if (!c.config.empty()) {
    kv = cn3d::KeyValues::load(c.config);
  }
  kv.merge(overrides(sub->remaining()));
  if (c.seed) {
    kv.set("seed", std::to_string(*c.seed));
  }
  return cn3d::run_config_from_kv(kv);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anchor-free LiDAR 3D detection toolkit"};
  app.require_subcommand(1);
  Common common;

  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset");
  cn3d::SynthOptions synth_opt;
  std::string synth_out;
  synth->add_option("--out", synth_out, "Dataset directory")->required();
  synth->add_option("--count", synth_opt.count, "Number of scenes");
  add_common(synth, common);

  auto* encode = app.add_subcommand("encode", "Encode training targets for one label file");
  std::string enc_labels, enc_cloud, enc_out;
  encode->add_option("--labels", enc_labels, "Native label file")->required();
  encode->add_option("--cloud", enc_cloud, "KITTI velodyne .bin (optional)");
  encode->add_option("--out", enc_out, "Output directory")->required();
  add_common(encode, common);

  auto* train = app.add_subcommand("train-toy", "Train the detector on synthetic scenes");
  std::string train_out;
  std::optional<std::size_t> train_steps;
  train->add_option("--out", train_out, "Output directory for checkpoint and logs")->required();
  train->add_option("--steps", train_steps, "Optimizer steps (overrides train.steps)");
  add_common(train, common);

  auto* infer = app.add_subcommand("infer", "Write one detection file per scene");
  std::string inf_scenes, inf_ckpt, inf_out;
  bool oracle = false;
  infer->add_option("--scenes", inf_scenes, "Dataset directory")->required();
  infer->add_option("--checkpoint", inf_ckpt, "Checkpoint directory");
  infer->add_flag("--oracle-head", oracle, "Decode encoded targets instead of running the model");
  infer->add_option("--out", inf_out, "Detection output directory")->required();
  add_common(infer, common);

  auto* eval = app.add_subcommand("eval", "Per-class AP40 (BEV and 3D)");
  std::string ev_dets, ev_labels, ev_mtp, ev_out;
  eval->add_option("--detections", ev_dets, "Detection directory")->required();
  eval->add_option("--labels", ev_labels, "Label directory")->required();
  eval->add_option("--mtp", ev_mtp, "Sidecar with mATE mASE mAOE mAVE mAAE [mAP]");
  eval->add_option("--out", ev_out, "Also write the report to this directory");
  add_common(eval, common);

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every loss and layer");
  cn3d::GradcheckOptions gopt;
  grad->add_option("--probes", gopt.probes, "Probes per operation");
  grad->add_option("--tolerance", gopt.tolerance, "Relative error tolerance");
  grad->add_option("--step", gopt.step, "Finite-difference step");
  add_common(grad, common);

  auto* nds_cmd = app.add_subcommand("nds", "nuScenes detection score from mAP and mTP errors");
  std::string nds_mtp;
  std::optional<double> nds_map;
  std::vector<double> nds_errors;
  nds_cmd->add_option("--mtp", nds_mtp, "Sidecar with mAP and the five errors");
  nds_cmd->add_option("--map", nds_map, "Mean AP in [0, 1]");
  nds_cmd->add_option("--errors", nds_errors, "mATE mASE mAOE mAVE mAAE")->expected(5);
  add_common(nds_cmd, common);

  auto* config = app.add_subcommand("config", "Print the default configuration");
  add_common(config, common);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      const auto cfg = load_config(common, synth);
      synth_opt.out = synth_out;
      cn3d::cmd_synth(cfg, synth_opt, std::cout);
    } else if (encode->parsed()) {
      const auto cfg = load_config(common, encode);
      cn3d::EncodeOptions opt{enc_labels, std::nullopt, enc_out};
      if (!enc_cloud.empty()) {
        opt.cloud = enc_cloud;
      }
      cn3d::cmd_encode(cfg, opt, std::cout);
    } else if (train->parsed()) {
      const auto cfg = load_config(common, train);
      cn3d::cmd_train_toy(cfg, {train_steps, train_out}, std::cout);
    } else if (infer->parsed()) {
      const auto cfg = load_config(common, infer);
      cn3d::InferOptions opt{inf_scenes, std::nullopt, oracle, inf_out};
      if (!inf_ckpt.empty()) {
        opt.checkpoint = inf_ckpt;
      }
      cn3d::cmd_infer(cfg, opt, std::cout);
    } else if (eval->parsed()) {
      const auto cfg = load_config(common, eval);
      cn3d::EvalOptions opt{ev_dets, ev_labels, std::nullopt};
      if (!ev_mtp.empty()) {
        opt.mtp = ev_mtp;
      }
      const auto out = cn3d::cmd_eval(cfg, opt);
      std::cout << out.text;
      if (!ev_out.empty()) {
        std::filesystem::create_directories(ev_out);
        cn3d::write_file_text(std::filesystem::path(ev_out) / "report.txt", out.text);
      }
    } else if (grad->parsed()) {
      load_config(common, grad);
      if (common.seed) {
        gopt.seed = static_cast<std::uint64_t>(*common.seed);
      }
      const auto rows = cn3d::run_gradcheck(gopt);
      std::cout << cn3d::format_gradcheck(rows);
      for (const auto& r : rows) {
        if (!r.pass) {
          std::cout << "result=fail\n";
          return 2;
        }
      }
      std::cout << "result=pass\n";
    } else if (nds_cmd->parsed()) {
      load_config(common, nds_cmd);
      double map = 0.0;
      std::array<double, 5> errors{};
      if (!nds_mtp.empty()) {
        const auto side = cn3d::parse_mtp_sidecar(cn3d::read_file_text(nds_mtp));
        if (!side.map && !nds_map) {
          throw cn3d::InvalidArgument("nds: the sidecar has no mAP; pass --map");
        }
        map = nds_map ? *nds_map : *side.map;
        errors = side.errors;
      } else {
        if (!nds_map || nds_errors.size() != 5) {
          throw cn3d::InvalidArgument("nds: give --mtp FILE or --map X --errors E1..E5");
        }
        map = *nds_map;
        std::copy(nds_errors.begin(), nds_errors.end(), errors.begin());
      }
      std::cout << "mAP=" << map << " NDS=" << cn3d::nds(map, errors) << '\n';
    } else if (config->parsed()) {
      load_config(common, config);
      std::cout << cn3d::default_config_text();
    }
  } catch (const std::exception& e) {
    std::cerr << "error=\"" << e.what() << "\"\n";
    return 1;
  }
  return 0;
}
