#pragma once

// Greedy view cover: per instance, repeatedly take the view that sees the
// most not-yet-observed candidate points.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "boxrefine/camera.hpp"
#include "boxrefine/candidates.hpp"
#include "boxrefine/scene.hpp"

namespace boxrefine {

/// Candidates visible in one view.
inline std::vector<std::int32_t> visible_candidates(const std::vector<std::int32_t>& candidates,
                                                    const Scene& scene, const CameraView& view,
                                                    const VisibilityTolerance& tol = {}) {
  std::vector<std::int32_t> out;
  for (auto p : candidates) {
    if (visible(scene.points[static_cast<std::size_t>(p)], view, tol)) out.push_back(p);
  }
  return out;
}

/// Points one view can see, identified by the view id.
struct ViewVisibility {
  std::int32_t view_id = 0;
  std::vector<std::int32_t> points;
};

struct GreedySelection {
  std::vector<std::int32_t> views;   // selection order
  std::vector<std::size_t> gains;    // newly observed points per selected view
  std::vector<std::int32_t> uncovered;  // candidates no selected view sees, ascending
};

/// Greedy cover by marginal gain over the still-unobserved candidates. Ties go
/// to the lowest view id. Stops once no remaining view adds a point, or after
/// max_views selections when a cap is given.
inline GreedySelection greedy_select_views(const std::vector<std::int32_t>& candidates,
                                           std::vector<ViewVisibility> visibility,
                                           std::optional<std::size_t> max_views = std::nullopt) {
  std::sort(visibility.begin(), visibility.end(),
            [](const ViewVisibility& a, const ViewVisibility& b) { return a.view_id < b.view_id; });

  std::vector<std::int32_t> cand = candidates;
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  auto local = [&cand](std::int32_t p) -> std::ptrdiff_t {
    const auto it = std::lower_bound(cand.begin(), cand.end(), p);
    return (it != cand.end() && *it == p) ? it - cand.begin() : -1;
  };

  // Each view's visible set restricted to the candidates, as local indices.
  std::vector<std::vector<std::size_t>> sets(visibility.size());
  for (std::size_t v = 0; v < visibility.size(); ++v) {
    for (auto p : visibility[v].points) {
      const auto l = local(p);
      if (l >= 0) sets[v].push_back(static_cast<std::size_t>(l));
    }
    std::sort(sets[v].begin(), sets[v].end());
    sets[v].erase(std::unique(sets[v].begin(), sets[v].end()), sets[v].end());
  }

  GreedySelection sel;
  std::vector<char> observed(cand.size(), 0);
  std::vector<char> taken(visibility.size(), 0);
  while (!max_views || sel.views.size() < *max_views) {
    std::size_t best_gain = 0;
    std::size_t best = 0;
    for (std::size_t v = 0; v < sets.size(); ++v) {
      if (taken[v]) continue;
      std::size_t gain = 0;
      for (auto l : sets[v]) gain += observed[l] ? 0 : 1;
      if (gain > best_gain) {
        best_gain = gain;
        best = v;
      }
    }
    if (best_gain == 0) break;
    taken[best] = 1;
    for (auto l : sets[best]) observed[l] = 1;
    sel.views.push_back(visibility[best].view_id);
    sel.gains.push_back(best_gain);
  }
  for (std::size_t l = 0; l < cand.size(); ++l) {
    if (!observed[l]) sel.uncovered.push_back(cand[l]);
  }
  return sel;
}

/// Projections and visibility flags of every candidate point in every view,
/// computed once and shared by view selection and confidence scoring.
class VisibilityCache {
 public:
  VisibilityCache() = default;

  VisibilityCache(const Scene& scene, const CandidateMap& candidates, const VisibilityTolerance& tol) {
    for (const auto& c : candidates.instances) points_.insert(points_.end(), c.points.begin(), c.points.end());
    std::sort(points_.begin(), points_.end());
    points_.erase(std::unique(points_.begin(), points_.end()), points_.end());
    slot_.reserve(points_.size());
    for (std::size_t s = 0; s < points_.size(); ++s) slot_.emplace(points_[s], s);

    proj_.resize(scene.views.size());
    vis_.resize(scene.views.size());
    for (std::size_t v = 0; v < scene.views.size(); ++v) {
      const auto& view = scene.views[v];
      view_index_.emplace(view.id, v);
      proj_[v].resize(points_.size());
      vis_[v].resize(points_.size());
      for (std::size_t s = 0; s < points_.size(); ++s) {
        proj_[v][s] = project_point(scene.points[static_cast<std::size_t>(points_[s])], view);
        vis_[v][s] = visible(proj_[v][s], view, tol) ? 1 : 0;
      }
    }
  }

  std::size_t view_index(std::int32_t view_id) const { return view_index_.at(view_id); }

  bool is_visible(std::int32_t point, std::size_t view_idx) const { return vis_[view_idx][slot_.at(point)] != 0; }

  const Projection& projection(std::int32_t point, std::size_t view_idx) const {
    return proj_[view_idx][slot_.at(point)];
  }

  std::vector<std::int32_t> visible_subset(const std::vector<std::int32_t>& pts, std::size_t view_idx) const {
    std::vector<std::int32_t> out;
    for (auto p : pts) {
      if (is_visible(p, view_idx)) out.push_back(p);
    }
    return out;
  }

 private:
  std::vector<std::int32_t> points_;
  std::unordered_map<std::int32_t, std::size_t> slot_;
  std::unordered_map<std::int32_t, std::size_t> view_index_;
  std::vector<std::vector<Projection>> proj_;
  std::vector<std::vector<char>> vis_;
};

struct InstanceViews {
  InstanceId instance = 0;
  std::vector<std::int32_t> views;
  std::vector<std::size_t> gains;
  std::vector<std::int32_t> uncovered;
  /// Visible candidates per selected view, aligned with `views`.
  std::vector<std::vector<std::int32_t>> visible;
};

struct ViewCover {
  std::vector<InstanceViews> instances;  // same order as the candidate map
  VisibilityCache cache;

  const InstanceViews* find(InstanceId id) const {
    for (const auto& iv : instances) {
      if (iv.instance == id) return &iv;
    }
    return nullptr;
  }
};

inline ViewCover build_view_cover(const CandidateMap& candidates, const Scene& scene,
                                  const VisibilityTolerance& tol = {},
                                  std::optional<std::size_t> max_views = std::nullopt) {
  ViewCover cover;
  cover.cache = VisibilityCache(scene, candidates, tol);
  for (const auto& c : candidates.instances) {
    InstanceViews iv;
    iv.instance = c.instance;
    std::vector<ViewVisibility> vis;
    vis.reserve(scene.views.size());
    for (std::size_t v = 0; v < scene.views.size(); ++v) {
      vis.push_back({scene.views[v].id, cover.cache.visible_subset(c.points, v)});
    }
    auto sel = greedy_select_views(c.points, vis, max_views);
    iv.views = std::move(sel.views);
    iv.gains = std::move(sel.gains);
    iv.uncovered = std::move(sel.uncovered);
    for (auto id : iv.views) {
      iv.visible.push_back(cover.cache.visible_subset(c.points, cover.cache.view_index(id)));
    }
    cover.instances.push_back(std::move(iv));
  }
  return cover;
}

}  // namespace boxrefine
