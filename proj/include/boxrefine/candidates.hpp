#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "boxrefine/error.hpp"
#include "boxrefine/scene.hpp"

namespace boxrefine {

/// Axis-aligned bounds of each superpoint, so box containment of a whole
/// superpoint is a single comparison.
struct SuperpointBounds {
  std::vector<Point3> lo;
  std::vector<Point3> hi;
  std::vector<std::vector<std::int32_t>> members;

  explicit SuperpointBounds(const Scene& scene) {
    if (!scene.superpoints) throw PreconditionError("candidate init: scene has no superpoints");
    const auto& sp = *scene.superpoints;
    members = sp.members();
    const auto count = static_cast<std::size_t>(sp.superpoint_count);
    lo.assign(count, Point3::Constant(std::numeric_limits<float>::infinity()));
    hi.assign(count, Point3::Constant(-std::numeric_limits<float>::infinity()));
    for (std::size_t i = 0; i < scene.points.size(); ++i) {
      const auto s = static_cast<std::size_t>(sp.assignment[i]);
      lo[s] = lo[s].cwiseMin(scene.points[i]);
      hi[s] = hi[s].cwiseMax(scene.points[i]);
    }
  }

  std::size_t size() const { return lo.size(); }

  bool inside(std::size_t s, const InstanceBox& box) const {
    return (lo[s].array() >= box.c_min.array()).all() && (hi[s].array() <= box.c_max.array()).all();
  }
};

/// Superpoints lying entirely inside the closed box, ascending.
inline std::vector<std::int32_t> superpoints_in_box(const InstanceBox& box, const SuperpointBounds& bounds) {
  std::vector<std::int32_t> out;
  for (std::size_t s = 0; s < bounds.size(); ++s) {
    if (bounds.inside(s, box)) out.push_back(static_cast<std::int32_t>(s));
  }
  return out;
}

inline std::vector<std::int32_t> superpoints_in_box(const InstanceBox& box, const Scene& scene) {
  return superpoints_in_box(box, SuperpointBounds(scene));
}

struct InstanceCandidates {
  InstanceId instance = 0;
  std::vector<std::int32_t> superpoints;  // ascending
  std::vector<std::int32_t> points;       // ascending
};

/// Candidate points per instance, in ascending instance-id order. A point may
/// be a candidate of several instances where boxes overlap.
struct CandidateMap {
  std::vector<InstanceCandidates> instances;

  const InstanceCandidates* find(InstanceId id) const {
    for (const auto& c : instances) {
      if (c.instance == id) return &c;
    }
    return nullptr;
  }
};

inline CandidateMap build_candidate_map(const Scene& scene, const std::vector<InstanceBox>& boxes) {
  const SuperpointBounds bounds(scene);
  std::vector<InstanceBox> sorted = boxes;
  std::sort(sorted.begin(), sorted.end(),
            [](const InstanceBox& a, const InstanceBox& b) { return a.instance_id < b.instance_id; });
  CandidateMap map;
  for (const auto& box : sorted) {
    InstanceCandidates c;
    c.instance = box.instance_id;
    c.superpoints = superpoints_in_box(box, bounds);
    for (auto s : c.superpoints) {
      const auto& m = bounds.members[static_cast<std::size_t>(s)];
      c.points.insert(c.points.end(), m.begin(), m.end());
    }
    std::sort(c.points.begin(), c.points.end());
    map.instances.push_back(std::move(c));
  }
  return map;
}

}  // namespace boxrefine
