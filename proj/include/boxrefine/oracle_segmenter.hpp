#pragma once

// Ground-truth stand-in for a promptable segmenter. Answers prompts from the
// rendered instance-id image of each view, with optional seeded corruption.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <unordered_map>
#include <vector>

#include "boxrefine/camera.hpp"
#include "boxrefine/error.hpp"
#include "boxrefine/prompting.hpp"
#include "boxrefine/rng.hpp"

namespace boxrefine {

struct OracleNoise {
  int erode_px = 0;
  int dilate_px = 0;
  /// Additive per-pixel uniform noise in [-jitter, jitter], clipped to [0, 1].
  double jitter = 0.0;
  /// Probability that a query is answered with an instance adjacent to the intended one.
  double mislabel = 0.0;
  /// Score given to non-target pixels inside a box prompt (box over-inclusion).
  double box_spill = 0.0;
  std::uint64_t seed = 0;

  bool any() const { return erode_px > 0 || dilate_px > 0 || jitter > 0 || mislabel > 0 || box_spill > 0; }
};

class OracleSegmenter final : public Segmenter {
 public:
  explicit OracleSegmenter(const Scene& scene, OracleNoise noise = {}, int footprint = 3) : noise_(noise) {
    if (!scene.has_gt()) throw PreconditionError("oracle segmenter needs gt_labels");
    for (const auto& v : scene.views) {
      ViewState st;
      st.render = render_gt(scene, v, footprint);
      st.adjacent = adjacency(st.render);
      views_.emplace(v.id, std::move(st));
    }
  }

  ScoreMask segment(const CameraView& view, const Prompt& prompt) override {
    const auto& st = state(view);
    if (const auto* box = std::get_if<BoxPrompt>(&prompt)) {
      Rng rng(query_key(view, *box));
      auto target = majority_in_box(st.render, *box);
      if (!target) return ScoreMask(view.width, view.height);
      InstanceId id = maybe_mislabel(st, *target, rng);
      ScoreMask m = binary_mask(st.render, id);
      if (noise_.box_spill > 0.0) {
        for (int y = box->y_min; y <= box->y_max; ++y) {
          for (int x = box->x_min; x <= box->x_max; ++x) {
            if (m.at(x, y) == 0.0f) m.at(x, y) = static_cast<float>(noise_.box_spill);
          }
        }
      }
      add_jitter(m, rng);
      return m;
    }
    const auto& pt = std::get<PointPrompt>(prompt);
    if (pt.x < 0 || pt.y < 0 || pt.x >= view.width || pt.y >= view.height) {
      throw PreconditionError("oracle: point prompt outside the image");
    }
    Rng rng(query_key(view, pt));
    const InstanceId id = maybe_mislabel(st, st.render.label_at(pt.x, pt.y), rng);
    ScoreMask m = binary_mask(st.render, id);
    add_jitter(m, rng);
    return m;
  }

  /// Foreground answer minus every background answer, clipped to [0, 1].
  ScoreMask segment_combined(const CameraView& view, const BoxPrompt& box,
                             std::span<const PointPrompt> negatives) override {
    ScoreMask out = segment(view, box);
    for (const auto& p : negatives) {
      const ScoreMask bg = segment(view, p);
      for (std::size_t i = 0; i < out.scores.size(); ++i) {
        out.scores[i] = std::clamp(out.scores[i] - bg.scores[i], 0.0f, 1.0f);
      }
    }
    return out;
  }

  const GtRender& render(std::int32_t view_id) const { return views_.at(view_id).render; }

 private:
  struct ViewState {
    GtRender render;
    std::map<InstanceId, std::vector<InstanceId>> adjacent;
  };

  const ViewState& state(const CameraView& view) const {
    const auto it = views_.find(view.id);
    if (it == views_.end()) throw PreconditionError("oracle: unknown view " + std::to_string(view.id));
    if (it->second.render.width != view.width || it->second.render.height != view.height) {
      throw PreconditionError("oracle: view dimensions differ from the rendered scene");
    }
    return it->second;
  }

  /// Non-background labels sharing a 4-neighbour pixel boundary with each label.
  static std::map<InstanceId, std::vector<InstanceId>> adjacency(const GtRender& r) {
    std::map<InstanceId, std::set<InstanceId>> adj;
    auto link = [&adj](InstanceId a, InstanceId b) {
      if (a == b) return;
      if (b != kBackground) adj[a].insert(b);
      if (a != kBackground) adj[b].insert(a);
    };
    for (int y = 0; y < r.height; ++y) {
      for (int x = 0; x < r.width; ++x) {
        const auto l = r.label_at(x, y);
        if (x + 1 < r.width) link(l, r.label_at(x + 1, y));
        if (y + 1 < r.height) link(l, r.label_at(x, y + 1));
      }
    }
    std::map<InstanceId, std::vector<InstanceId>> out;
    for (auto& [k, s] : adj) out[k] = {s.begin(), s.end()};
    return out;
  }

  /// Instance with the most rendered pixels inside the box, lowest id on ties.
  static std::optional<InstanceId> majority_in_box(const GtRender& r, const BoxPrompt& b) {
    std::map<InstanceId, std::size_t> counts;
    for (int y = std::max(0, b.y_min); y <= std::min(r.height - 1, b.y_max); ++y) {
      for (int x = std::max(0, b.x_min); x <= std::min(r.width - 1, b.x_max); ++x) {
        const auto l = r.label_at(x, y);
        if (l != kBackground) ++counts[l];
      }
    }
    std::optional<InstanceId> best;
    std::size_t best_count = 0;
    for (const auto& [id, c] : counts) {
      if (c > best_count) {
        best = id;
        best_count = c;
      }
    }
    return best;
  }

  InstanceId maybe_mislabel(const ViewState& st, InstanceId id, Rng& rng) const {
    if (noise_.mislabel <= 0.0 || !rng.bernoulli(noise_.mislabel)) return id;
    const auto it = st.adjacent.find(id);
    if (it == st.adjacent.end() || it->second.empty()) return id;
    return it->second[rng.below(it->second.size())];
  }

  ScoreMask binary_mask(const GtRender& r, InstanceId id) const {
    ScoreMask m(r.width, r.height);
    for (std::size_t i = 0; i < m.scores.size(); ++i) m.scores[i] = r.labels[i] == id ? 1.0f : 0.0f;
    if (noise_.erode_px > 0) m = morph(m, noise_.erode_px, false);
    if (noise_.dilate_px > 0) m = morph(m, noise_.dilate_px, true);
    return m;
  }

  /// Square-window max (dilate) or min (erode) filter on a 0/1 mask.
  static ScoreMask morph(const ScoreMask& in, int radius, bool dilate) {
    ScoreMask out(in.width, in.height);
    for (int y = 0; y < in.height; ++y) {
      for (int x = 0; x < in.width; ++x) {
        float v = dilate ? 0.0f : 1.0f;
        for (int dy = -radius; dy <= radius; ++dy) {
          const int yy = std::clamp(y + dy, 0, in.height - 1);
          for (int dx = -radius; dx <= radius; ++dx) {
            const int xx = std::clamp(x + dx, 0, in.width - 1);
            v = dilate ? std::max(v, in.at(xx, yy)) : std::min(v, in.at(xx, yy));
          }
        }
        out.at(x, y) = v;
      }
    }
    return out;
  }

  void add_jitter(ScoreMask& m, Rng& rng) const {
    if (noise_.jitter <= 0.0) return;
    for (auto& s : m.scores) {
      s = static_cast<float>(std::clamp(s + rng.uniform(-noise_.jitter, noise_.jitter), 0.0, 1.0));
    }
  }

  // Noise for a query depends only on (seed, view, prompt), never on call order.
  std::uint64_t query_key(const CameraView& v, const BoxPrompt& b) const {
    std::uint64_t h = mix_key(noise_.seed, static_cast<std::uint64_t>(v.id));
    for (int c : {1, b.x_min, b.y_min, b.x_max, b.y_max}) h = mix_key(h, static_cast<std::uint64_t>(c));
    return h;
  }
  std::uint64_t query_key(const CameraView& v, const PointPrompt& p) const {
    std::uint64_t h = mix_key(noise_.seed, static_cast<std::uint64_t>(v.id));
    for (int c : {2, p.x, p.y}) h = mix_key(h, static_cast<std::uint64_t>(c));
    return h;
  }

  OracleNoise noise_;
  std::unordered_map<std::int32_t, ViewState> views_;
};

}  // namespace boxrefine
