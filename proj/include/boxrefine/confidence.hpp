#pragma once

// Per-point confidence from the selected views' merged score maps, mean
// confidence per superpoint, and the final superpoint vote.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "boxrefine/candidates.hpp"
#include "boxrefine/prompting.hpp"
#include "boxrefine/view_select.hpp"

namespace boxrefine {

/// nullopt stands for a point or superpoint no selected view observed.
using Confidence = std::optional<double>;

/// Visibility-weighted mean of the score at the point's pixel over the
/// instance's selected views. `masks` is aligned with `views.views`.
inline Confidence point_confidence(std::int32_t point, const InstanceViews& views, std::span<const ScoreMask> masks,
                                   const VisibilityCache& cache) {
  double sum = 0.0;
  int seen = 0;
  for (std::size_t m = 0; m < views.views.size(); ++m) {
    const std::size_t vi = cache.view_index(views.views[m]);
    if (!cache.is_visible(point, vi)) continue;
    const Projection& pr = cache.projection(point, vi);
    sum += masks[m].at(pr.x, pr.y);
    ++seen;
  }
  if (seen == 0) return std::nullopt;
  return sum / seen;
}

/// Mean over the observed member confidences.
inline Confidence superpoint_confidence(std::span<const Confidence> member_conf) {
  double sum = 0.0;
  int n = 0;
  for (const auto& c : member_conf) {
    if (c) {
      sum += *c;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

struct InstanceConfidence {
  InstanceId instance = 0;
  std::vector<std::int32_t> points;
  std::vector<Confidence> point_conf;  // aligned with points
  std::vector<std::int32_t> superpoints;
  std::vector<Confidence> sp_conf;  // aligned with superpoints
};

struct ConfidenceTable {
  std::vector<InstanceConfidence> instances;  // candidate-map order
};

/// `masks[i]` holds the merged maps of cover.instances[i], one per selected view.
inline ConfidenceTable compute_confidence(const Scene& scene, const CandidateMap& candidates, const ViewCover& cover,
                                          const std::vector<std::vector<ScoreMask>>& masks) {
  if (!scene.superpoints) throw PreconditionError("confidence: scene has no superpoints");
  const auto& assign = scene.superpoints->assignment;
  ConfidenceTable table;
  for (std::size_t i = 0; i < candidates.instances.size(); ++i) {
    const auto& cand = candidates.instances[i];
    const auto& iv = cover.instances[i];
    InstanceConfidence ic;
    ic.instance = cand.instance;
    ic.points = cand.points;
    ic.superpoints = cand.superpoints;
    ic.point_conf.reserve(cand.points.size());
    for (auto p : cand.points) ic.point_conf.push_back(point_confidence(p, iv, masks[i], cover.cache));

    std::map<std::int32_t, std::vector<Confidence>> by_sp;
    for (std::size_t k = 0; k < cand.points.size(); ++k) {
      by_sp[assign[static_cast<std::size_t>(cand.points[k])]].push_back(ic.point_conf[k]);
    }
    for (auto s : cand.superpoints) ic.sp_conf.push_back(superpoint_confidence(by_sp[s]));
    table.instances.push_back(std::move(ic));
  }
  return table;
}

inline double box_volume_of(const std::vector<InstanceBox>& boxes, InstanceId id) {
  for (const auto& b : boxes) {
    if (b.instance_id == id) return b.volume();
  }
  throw PreconditionError("no box for instance " + std::to_string(id));
}

/// Among `ids`, the instance with the smallest box volume, lowest id on ties.
inline InstanceId smallest_box(std::span<const InstanceId> ids, const std::vector<InstanceBox>& boxes) {
  InstanceId best = ids[0];
  double best_vol = box_volume_of(boxes, best);
  for (auto id : ids.subspan(1)) {
    const double v = box_volume_of(boxes, id);
    if (v < best_vol || (v == best_vol && id < best)) {
      best = id;
      best_vol = v;
    }
  }
  return best;
}

struct VoteResult {
  LabelMap labels;
  /// Ranking score per predicted instance: mean winning superpoint confidence.
  std::map<InstanceId, double> instance_scores;
  std::size_t fallback_superpoints = 0;
};

/// Superpoint vote: candidate instances with confidence <= 0 or unobserved are
/// dropped and the rest go to the argmax (lowest id on ties). Superpoints with
/// no surviving instance become background, unless every candidate confidence
/// was unobserved, in which case the smallest candidate box wins.
inline VoteResult assign_labels(const Scene& scene, const ConfidenceTable& table,
                                const std::vector<InstanceBox>& boxes) {
  if (!scene.superpoints) throw PreconditionError("assign_labels: scene has no superpoints");
  const auto members = scene.superpoints->members();
  std::map<std::int32_t, std::vector<std::pair<InstanceId, Confidence>>> by_sp;
  for (const auto& ic : table.instances) {
    for (std::size_t k = 0; k < ic.superpoints.size(); ++k) by_sp[ic.superpoints[k]].emplace_back(ic.instance, ic.sp_conf[k]);
  }

  VoteResult res;
  res.labels.labels.assign(scene.points.size(), kBackground);
  std::map<InstanceId, std::pair<double, int>> score_acc;
  for (const auto& [sp, entries] : by_sp) {
    std::optional<InstanceId> winner;
    double best = 0.0;
    bool all_unobserved = true;
    for (const auto& [id, conf] : entries) {
      if (!conf) continue;
      all_unobserved = false;
      if (*conf <= 0.0) continue;
      if (!winner || *conf > best || (*conf == best && id < *winner)) {
        winner = id;
        best = *conf;
      }
    }
    if (winner) {
      auto& acc = score_acc[*winner];
      acc.first += best;
      acc.second += 1;
    } else if (all_unobserved) {
      std::vector<InstanceId> ids;
      for (const auto& e : entries) ids.push_back(e.first);
      winner = smallest_box(ids, boxes);
      score_acc.try_emplace(*winner, 0.0, 0);
      ++res.fallback_superpoints;
    }
    if (!winner) continue;
    for (auto p : members[static_cast<std::size_t>(sp)]) res.labels.labels[static_cast<std::size_t>(p)] = *winner;
  }
  for (const auto& [id, acc] : score_acc) res.instance_scores[id] = acc.second ? acc.first / acc.second : 0.0;
  return res;
}

/// Candidate-only labelling: each candidate point goes to its smallest
/// containing box. Ranking score is the negated box volume.
inline VoteResult baseline_assign(std::size_t point_count, const CandidateMap& candidates,
                                  const std::vector<InstanceBox>& boxes) {
  VoteResult res;
  res.labels.labels.assign(point_count, kBackground);
  std::vector<double> vol(point_count, 0.0);
  for (const auto& c : candidates.instances) {
    const double v = box_volume_of(boxes, c.instance);
    for (auto p : c.points) {
      auto& cur = res.labels.labels[static_cast<std::size_t>(p)];
      if (cur == kBackground || v < vol[static_cast<std::size_t>(p)] ||
          (v == vol[static_cast<std::size_t>(p)] && c.instance < cur)) {
        cur = c.instance;
        vol[static_cast<std::size_t>(p)] = v;
      }
    }
  }
  for (auto l : res.labels.labels) {
    if (l != kBackground) res.instance_scores.try_emplace(l, -box_volume_of(boxes, l));
  }
  return res;
}

}  // namespace boxrefine
