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

#include "cn3d/evalkit.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "cn3d/error.hpp"

namespace cn3d {

double EvalConfig::threshold_for(int cls) const {
  if (cls >= 0 && static_cast<std::size_t>(cls) < thresholds.size()) {
    return thresholds[static_cast<std::size_t>(cls)];
  }
  return default_threshold;
}

void EvalConfig::validate() const {
  for (double t : thresholds) {
    if (!(t > 0.0 && t <= 1.0)) {
      throw InvalidArgument("EvalConfig: IoU thresholds must lie in (0, 1]");
    }
  }
  if (!(default_threshold > 0.0 && default_threshold <= 1.0) || recall_positions < 1) {
    throw InvalidArgument("EvalConfig: invalid default threshold or recall positions");
  }
}

EvalConfig default_eval_config(const ClassNames& names, IouMode mode) {
  EvalConfig cfg;
  cfg.mode = mode;
  for (const auto& n : names) {
    cfg.thresholds.push_back(n == "Pedestrian" || n == "Cyclist" ? 0.5 : 0.7);
  }
  return cfg;
}

void MatchResult::merge(const MatchResult& other) {
  detections.insert(detections.end(), other.detections.begin(), other.detections.end());
  num_gt += other.num_gt;
}

MatchResult match_detections(std::span<const Detection> dets, std::span<const Box3D> gts,
                             double threshold, IouMode mode) {
  MatchResult out;
  out.num_gt = gts.size();
  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = i;
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].confidence > dets[b].confidence;
  });
  std::vector<bool> taken(gts.size(), false);
  for (const std::size_t i : order) {
    double best = -1.0;
    std::size_t best_j = gts.size();
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (taken[j]) {
        continue;
      }
      const double iou = mode == IouMode::kBev ? rotated_iou_bev(dets[i].box, gts[j])
                                               : iou_3d(dets[i].box, gts[j]);
      if (iou > best) {
        best = iou;
        best_j = j;
      }
    }
    const bool tp = best_j < gts.size() && best >= threshold;
    if (tp) {
      taken[best_j] = true;
    }
    out.detections.push_back({dets[i].confidence, tp});
  }
  return out;
}

double ap_at_recall_positions(const MatchResult& result, std::size_t positions) {
  if (result.num_gt == 0) {
    throw InvalidArgument("ap: undefined without ground truth");
  }
  if (positions < 1) {
    throw InvalidArgument("ap: need at least one recall position");
  }
  auto dets = result.detections;
  std::stable_sort(dets.begin(), dets.end(), [](const ScoredFlag& a, const ScoredFlag& b) {
    return a.confidence > b.confidence;
  });
  const auto n_gt = static_cast<double>(result.num_gt);
  std::vector<double> recall(dets.size());
  std::vector<double> precision(dets.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    tp += dets[i].true_positive ? 1 : 0;
    recall[i] = static_cast<double>(tp) / n_gt;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  // Interpolated precision: max precision at any recall >= r, via a suffix max.
  for (std::size_t i = dets.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double sum = 0.0;
  std::size_t cursor = 0;
  for (std::size_t k = 1; k <= positions; ++k) {
    const double r = static_cast<double>(k) / static_cast<double>(positions);
    while (cursor < dets.size() && recall[cursor] < r) {
      ++cursor;
    }
    if (cursor < dets.size()) {
      sum += precision[cursor];
    }
  }
  return sum / static_cast<double>(positions);
}

double nds(double map, const std::array<double, 5>& errors) {
  double sum = 5.0 * map;
  for (double e : errors) {
    sum += 1.0 - std::min(1.0, e);
  }
  return sum / 10.0;
}

MtpSidecar parse_mtp_sidecar(const std::string& text) {
  const auto kv = KeyValues::parse(text, "mTP sidecar");
  MtpSidecar out;
  const std::array<const char*, 5> keys{"mATE", "mASE", "mAOE", "mAVE", "mAAE"};
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (!kv.has(keys[i])) {
      throw ParseError(std::string("mTP sidecar: missing ") + keys[i]);
    }
    out.errors[i] = kv.get_double(keys[i], 0.0);
    if (out.errors[i] < 0.0) {
      throw InvalidArgument(std::string("mTP sidecar: negative ") + keys[i]);
    }
  }
  if (kv.has("mAP")) {
    out.map = kv.get_double("mAP", 0.0);
  }
  kv.reject_unknown("mTP sidecar");
  return out;
}

std::vector<ClassReport> evaluate(std::span<const Frame> frames, const ClassNames& names,
                                  const EvalConfig& cfg) {
  cfg.validate();
  std::vector<ClassReport> out;
  for (std::size_t c = 0; c < names.size(); ++c) {
    const int cls = static_cast<int>(c);
    MatchResult bev;
    MatchResult box3d;
    ClassReport rep;
    rep.name = names[c];
    for (const auto& f : frames) {
      std::vector<Detection> dets;
      std::vector<Box3D> gts;
      for (const auto& d : f.detections) {
        if (d.cls == cls) {
          dets.push_back(d);
        }
      }
      for (std::size_t i = 0; i < f.gt_boxes.size(); ++i) {
        if (f.gt_classes[i] == cls) {
          gts.push_back(f.gt_boxes[i]);
        }
      }
      rep.num_det += dets.size();
      bev.merge(match_detections(dets, gts, cfg.threshold_for(cls), IouMode::kBev));
      box3d.merge(match_detections(dets, gts, cfg.threshold_for(cls), IouMode::k3d));
    }
    rep.num_gt = bev.num_gt;
    if (rep.num_gt > 0) {
      rep.defined = true;
      rep.ap_bev = ap_at_recall_positions(bev, cfg.recall_positions);
      rep.ap_3d = ap_at_recall_positions(box3d, cfg.recall_positions);
    }
    out.push_back(rep);
  }
  return out;
}

std::string format_report(std::span<const ClassReport> report, std::size_t positions) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-12s %8s %8s %10s %10s\n", "class", "gt", "dets",
                ("AP" + std::to_string(positions) + "_bev").c_str(),
                ("AP" + std::to_string(positions) + "_3d").c_str());
  os << buf;
  for (const auto& r : report) {
    if (r.defined) {
      std::snprintf(buf, sizeof buf, "%-12s %8zu %8zu %10.4f %10.4f\n", r.name.c_str(), r.num_gt,
                    r.num_det, r.ap_bev, r.ap_3d);
    } else {
      std::snprintf(buf, sizeof buf, "%-12s %8zu %8zu %10s %10s\n", r.name.c_str(), r.num_gt,
                    r.num_det, "n/a", "n/a");
    }
    os << buf;
  }
  return os.str();
}

}  // namespace cn3d
