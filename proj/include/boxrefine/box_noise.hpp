#pragma once

// Simulated annotation noise: tight ground-truth boxes are enlarged by a
// fraction lambda of their extent and their corners jittered.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <set>
#include <utility>
#include <vector>

#include "boxrefine/error.hpp"
#include "boxrefine/rng.hpp"
#include "boxrefine/scene.hpp"

namespace boxrefine {

struct NoiseConfig {
  double lambda = 0.0;
  std::uint64_t seed = 0;
  bool clamp_to_cover = true;
};

/// Component-wise min/max over the instance's ground-truth points. The
/// semantic class is copied from a manifest box with the same id, if any.
inline InstanceBox tight_box(const Scene& scene, InstanceId instance) {
  if (!scene.has_gt()) throw PreconditionError("tight_box: scene has no gt_labels");
  InstanceBox box;
  box.instance_id = instance;
  box.c_min.setConstant(std::numeric_limits<float>::infinity());
  box.c_max.setConstant(-std::numeric_limits<float>::infinity());
  bool any = false;
  for (std::size_t i = 0; i < scene.points.size(); ++i) {
    if (scene.gt_labels[i] != instance) continue;
    box.c_min = box.c_min.cwiseMin(scene.points[i]);
    box.c_max = box.c_max.cwiseMax(scene.points[i]);
    any = true;
  }
  if (!any) throw PreconditionError("tight_box: instance " + std::to_string(instance) + " has no points");
  for (const auto& b : scene.boxes) {
    if (b.instance_id == instance) {
      box.semantic_class = b.semantic_class;
      break;
    }
  }
  return box;
}

/// Enlarges by 0.5 * lambda * extent on both sides, then adds N(0, sigma) to
/// each of the six corner coordinates (c_min xyz first, then c_max xyz) with
/// sigma = 0.5 * lambda * (lambda * extent) per axis. `normal` yields standard
/// normal draws, which lets callers substitute a fixed sequence.
template <typename NormalSource>
InstanceBox perturb_box(const InstanceBox& box, const NoiseConfig& cfg, NormalSource&& normal) {
  const Eigen::Vector3d lo0 = box.c_min.cast<double>();
  const Eigen::Vector3d hi0 = box.c_max.cast<double>();
  const Eigen::Vector3d grow = cfg.lambda * (hi0 - lo0);
  const Eigen::Vector3d sigma = 0.5 * cfg.lambda * grow;
  Eigen::Vector3d lo = lo0 - 0.5 * grow;
  Eigen::Vector3d hi = hi0 + 0.5 * grow;
  for (int a = 0; a < 3; ++a) lo[a] += sigma[a] * normal();
  for (int a = 0; a < 3; ++a) hi[a] += sigma[a] * normal();

  InstanceBox out = box;
  out.c_min = lo.cast<float>();
  out.c_max = hi.cast<float>();
  for (int a = 0; a < 3; ++a) {
    if (out.c_min[a] > out.c_max[a]) std::swap(out.c_min[a], out.c_max[a]);
  }
  if (cfg.clamp_to_cover) {
    // Union with the input box, done in float so coverage is exact.
    out.c_min = out.c_min.cwiseMin(box.c_min);
    out.c_max = out.c_max.cwiseMax(box.c_max);
  }
  return out;
}

inline InstanceBox perturb_box(const InstanceBox& box, const NoiseConfig& cfg, Rng& rng) {
  return perturb_box(box, cfg, [&rng] { return rng.normal(); });
}

/// Instance ids present in the ground truth, ascending, background excluded.
inline std::vector<InstanceId> gt_instances(const std::vector<InstanceId>& labels) {
  std::set<InstanceId> ids(labels.begin(), labels.end());
  ids.erase(kBackground);
  return {ids.begin(), ids.end()};
}

/// One noisy box per ground-truth instance (ascending id). Instance k draws
/// from the substream seeded with cfg.seed XOR k.
inline std::vector<InstanceBox> perturb_scene_boxes(const Scene& scene, const NoiseConfig& cfg) {
  if (!scene.has_gt()) throw PreconditionError("perturb_scene_boxes: scene has no gt_labels");
  if (!(cfg.lambda >= 0.0 && cfg.lambda <= 1.0)) {
    throw PreconditionError("noise rate lambda must lie in [0, 1]");
  }
  std::vector<InstanceBox> out;
  for (InstanceId id : gt_instances(scene.gt_labels)) {
    Rng rng = Rng::substream(cfg.seed, static_cast<std::uint64_t>(static_cast<std::int64_t>(id)));
    out.push_back(perturb_box(tight_box(scene, id), cfg, rng));
  }
  return out;
}

}  // namespace boxrefine
