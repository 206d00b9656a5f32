#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "boxrefine/error.hpp"
#include "boxrefine/scene.hpp"

namespace boxrefine {

inline void check_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw PreconditionError(std::string(what) + ": label arrays differ in length (" + std::to_string(a) + " vs " +
                            std::to_string(b) + ")");
  }
}

/// Points whose predicted label differs from ground truth; background counts as a label.
inline std::size_t wrong_points(std::span<const InstanceId> pred, std::span<const InstanceId> gt) {
  check_same_length(pred.size(), gt.size(), "wrong_points");
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) n += pred[i] != gt[i] ? 1 : 0;
  return n;
}

/// Most frequent label, lowest label on ties.
inline InstanceId majority_label(std::span<const InstanceId> labels, std::span<const std::int32_t> members) {
  std::map<InstanceId, std::size_t> counts;
  for (auto p : members) ++counts[labels[static_cast<std::size_t>(p)]];
  InstanceId best = kBackground;
  std::size_t best_count = 0;
  for (const auto& [l, c] : counts) {
    if (c > best_count) {
      best = l;
      best_count = c;
    }
  }
  return best;
}

/// Superpoints whose majority predicted label differs from their majority gt label.
inline std::size_t wrong_superpoints(std::span<const InstanceId> pred, std::span<const InstanceId> gt,
                                     const SuperpointPartition& sp) {
  check_same_length(pred.size(), gt.size(), "wrong_superpoints");
  check_same_length(pred.size(), sp.assignment.size(), "wrong_superpoints");
  std::size_t n = 0;
  for (const auto& m : sp.members()) n += majority_label(pred, m) != majority_label(gt, m) ? 1 : 0;
  return n;
}

inline double instance_iou(std::span<const InstanceId> pred, std::span<const InstanceId> gt, InstanceId instance) {
  check_same_length(pred.size(), gt.size(), "instance_iou");
  std::size_t inter = 0, uni = 0;
  bool present = false;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const bool g = gt[i] == instance;
    const bool p = pred[i] == instance;
    present = present || g;
    inter += (g && p) ? 1 : 0;
    uni += (g || p) ? 1 : 0;
  }
  if (!present) throw PreconditionError("instance_iou: instance " + std::to_string(instance) + " absent from gt");
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Average precision at one IoU threshold. Predicted instances are taken in
/// descending score order (ascending id on ties) and greedily matched to the
/// unmatched gt instance of highest IoU; the area under the precision-recall
/// curve uses all-point interpolation. Instances missing from `scores` rank
/// last with score 0.
inline double ap_at(std::span<const InstanceId> pred, const std::map<InstanceId, double>& scores,
                    std::span<const InstanceId> gt, double threshold) {
  check_same_length(pred.size(), gt.size(), "ap_at");
  std::map<InstanceId, std::size_t> pred_size, gt_size;
  std::map<std::pair<InstanceId, InstanceId>, std::size_t> inter;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] != kBackground) ++pred_size[pred[i]];
    if (gt[i] != kBackground) ++gt_size[gt[i]];
    if (pred[i] != kBackground && gt[i] != kBackground) ++inter[{pred[i], gt[i]}];
  }
  if (gt_size.empty()) return pred_size.empty() ? 1.0 : 0.0;

  std::vector<std::pair<double, InstanceId>> order;
  for (const auto& [id, n] : pred_size) {
    const auto it = scores.find(id);
    order.emplace_back(it == scores.end() ? 0.0 : it->second, id);
  }
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });

  std::set<InstanceId> matched;
  std::vector<double> precision, recall;
  std::size_t tp = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const InstanceId pid = order[r].second;
    std::optional<InstanceId> best;
    double best_iou = -1.0;
    for (const auto& [gid, gn] : gt_size) {
      if (matched.count(gid)) continue;
      const auto it = inter.find({pid, gid});
      const std::size_t in = it == inter.end() ? 0 : it->second;
      const double iou = static_cast<double>(in) / static_cast<double>(pred_size[pid] + gn - in);
      if (iou > best_iou) {
        best_iou = iou;
        best = gid;
      }
    }
    if (best && best_iou >= threshold) {
      matched.insert(*best);
      ++tp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(r + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(gt_size.size()));
  }

  // Precision envelope, then area over recall steps.
  for (std::size_t r = precision.size(); r-- > 1;) precision[r - 1] = std::max(precision[r - 1], precision[r]);
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t r = 0; r < precision.size(); ++r) {
    ap += (recall[r] - prev_recall) * precision[r];
    prev_recall = recall[r];
  }
  return ap;
}

/// Mean of ap_at over the IoU ladder 0.50, 0.55, ..., 0.95.
inline double mean_ap(std::span<const InstanceId> pred, const std::map<InstanceId, double>& scores,
                      std::span<const InstanceId> gt) {
  double sum = 0.0;
  for (int t = 0; t < 10; ++t) sum += ap_at(pred, scores, gt, 0.5 + 0.05 * t);
  return sum / 10.0;
}

struct EvalReport {
  std::size_t wrong_points = 0;
  std::size_t wrong_superpoints = 0;
  std::size_t point_count = 0;
  std::size_t superpoint_count = 0;
  std::map<InstanceId, double> per_instance_iou;
  double mean_iou = 0.0;
  double ap = 0.0;
  double ap50 = 0.0;
  double ap25 = 0.0;
};

inline EvalReport evaluate(std::span<const InstanceId> pred, const std::map<InstanceId, double>& scores,
                           std::span<const InstanceId> gt, const std::optional<SuperpointPartition>& sp) {
  EvalReport r;
  r.point_count = gt.size();
  r.wrong_points = wrong_points(pred, gt);
  if (sp) {
    r.wrong_superpoints = wrong_superpoints(pred, gt, *sp);
    r.superpoint_count = static_cast<std::size_t>(sp->superpoint_count);
  }
  std::set<InstanceId> ids(gt.begin(), gt.end());
  ids.erase(kBackground);
  for (auto id : ids) {
    r.per_instance_iou[id] = instance_iou(pred, gt, id);
    r.mean_iou += r.per_instance_iou[id];
  }
  if (!ids.empty()) r.mean_iou /= static_cast<double>(ids.size());
  r.ap = mean_ap(pred, scores, gt);
  r.ap50 = ap_at(pred, scores, gt, 0.5);
  r.ap25 = ap_at(pred, scores, gt, 0.25);
  return r;
}

}  // namespace boxrefine
