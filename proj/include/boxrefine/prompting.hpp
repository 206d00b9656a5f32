#pragma once

// Complementary prompts for a promptable 2D segmenter: one foreground box
// around an instance's projected candidates plus background points sampled
// just outside them. The resulting masks are merged into one score map.

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "boxrefine/error.hpp"
#include "boxrefine/scene.hpp"

namespace boxrefine {

struct Pixel {
  int x = 0;
  int y = 0;

  bool operator==(const Pixel&) const = default;
};

/// Inclusive pixel box.
struct BoxPrompt {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;

  bool operator==(const BoxPrompt&) const = default;
};

struct PointPrompt {
  int x = 0;
  int y = 0;

  bool operator==(const PointPrompt&) const = default;
};

/// Foreground box or background point.
using Prompt = std::variant<BoxPrompt, PointPrompt>;

/// Dense per-pixel score map, row-major.
struct ScoreMask {
  int width = 0;
  int height = 0;
  std::vector<float> scores;

  ScoreMask() = default;
  ScoreMask(int w, int h, float fill = 0.0f)
      : width(w), height(h), scores(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  float at(int x, int y) const {
    return scores[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
  float& at(int x, int y) {
    return scores[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
  bool same_shape(const ScoreMask& o) const { return width == o.width && height == o.height; }

  bool operator==(const ScoreMask&) const = default;
};

enum class PromptMode { Merged, SingleCombined };

enum class BackendKind { Oracle, Remote };

struct SegmenterConfig {
  PromptMode mode = PromptMode::Merged;
  double beta = 0.5;
  int window = 32;
  BackendKind backend = BackendKind::Oracle;
  std::string endpoint;
};

inline const char* to_string(PromptMode m) { return m == PromptMode::Merged ? "merged" : "single_combined"; }

/// Adapter over any promptable segmenter. Implementations return masks with
/// the view's exact dimensions and scores in [0, 1].
class Segmenter {
 public:
  virtual ~Segmenter() = default;

  virtual ScoreMask segment(const CameraView& view, const Prompt& prompt) = 0;

  /// One query carrying the box as a positive and the points as negatives.
  virtual ScoreMask segment_combined(const CameraView& view, const BoxPrompt& box,
                                     std::span<const PointPrompt> negatives) = 0;

  /// False when callers must serialize calls to this adapter.
  virtual bool thread_safe() const { return true; }
};

/// Bounding box of the projected pixels, clipped to the image.
inline BoxPrompt foreground_box_prompt(std::span<const Pixel> pixels, int width, int height) {
  if (pixels.empty()) throw PreconditionError("foreground prompt needs at least one projected pixel");
  BoxPrompt b{pixels[0].x, pixels[0].y, pixels[0].x, pixels[0].y};
  for (const auto& p : pixels) {
    b.x_min = std::min(b.x_min, p.x);
    b.y_min = std::min(b.y_min, p.y);
    b.x_max = std::max(b.x_max, p.x);
    b.y_max = std::max(b.y_max, p.y);
  }
  b.x_min = std::clamp(b.x_min, 0, width - 1);
  b.x_max = std::clamp(b.x_max, 0, width - 1);
  b.y_min = std::clamp(b.y_min, 0, height - 1);
  b.y_max = std::clamp(b.y_max, 0, height - 1);
  return b;
}

/// Tiles the image into window x window cells, marks cells holding a
/// projected pixel, and returns the centre of every unmarked cell that is
/// 8-adjacent to a marked one, in row-major cell order.
inline std::vector<PointPrompt> background_window_prompts(std::span<const Pixel> pixels, int width, int height,
                                                          int window) {
  if (window < 1) throw PreconditionError("background window must be >= 1 pixel");
  const int cols = (width + window - 1) / window;
  const int rows = (height + window - 1) / window;
  std::vector<char> occupied(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), 0);
  auto cell = [cols](int r, int c) { return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c); };
  for (const auto& p : pixels) {
    if (p.x < 0 || p.y < 0 || p.x >= width || p.y >= height) continue;
    occupied[cell(p.y / window, p.x / window)] = 1;
  }
  std::vector<PointPrompt> out;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (occupied[cell(r, c)]) continue;
      bool near = false;
      for (int dr = -1; dr <= 1 && !near; ++dr) {
        for (int dc = -1; dc <= 1 && !near; ++dc) {
          const int rr = r + dr, cc = c + dc;
          near = rr >= 0 && rr < rows && cc >= 0 && cc < cols && occupied[cell(rr, cc)];
        }
      }
      if (!near) continue;
      const int x0 = c * window, x1 = std::min(width, (c + 1) * window) - 1;
      const int y0 = r * window, y1 = std::min(height, (r + 1) * window) - 1;
      out.push_back({(x0 + x1) / 2, (y0 + y1) / 2});
    }
  }
  return out;
}

/// H = fg - beta * max(bg_1, ..., bg_n), element-wise; H = fg when n = 0.
inline ScoreMask merge_masks(const ScoreMask& fg, std::span<const ScoreMask> bgs, double beta) {
  ScoreMask out = fg;
  if (bgs.empty()) return out;
  for (const auto& b : bgs) {
    if (!b.same_shape(fg)) throw PreconditionError("merge_masks: mask dimensions differ");
  }
  for (std::size_t i = 0; i < out.scores.size(); ++i) {
    float m = bgs[0].scores[i];
    for (std::size_t k = 1; k < bgs.size(); ++k) m = std::max(m, bgs[k].scores[i]);
    out.scores[i] = static_cast<float>(fg.scores[i] - beta * m);
  }
  return out;
}

/// Enforces the adapter contract on a returned mask.
inline void check_mask(const ScoreMask& mask, const CameraView& view) {
  if (mask.width != view.width || mask.height != view.height ||
      mask.scores.size() != view.pixel_count()) {
    throw ProtocolError("segmenter returned a " + std::to_string(mask.width) + "x" + std::to_string(mask.height) +
                        " mask for a " + std::to_string(view.width) + "x" + std::to_string(view.height) + " view");
  }
}

/// Prompts derived for one (instance, view) pair.
struct ViewPrompts {
  BoxPrompt foreground;
  std::vector<PointPrompt> background;
};

inline ViewPrompts make_view_prompts(std::span<const Pixel> pixels, const CameraView& view, int window) {
  return {foreground_box_prompt(pixels, view.width, view.height),
          background_window_prompts(pixels, view.width, view.height, window)};
}

/// Score map for one instance in one view from the projected pixels of its
/// visible candidates.
inline ScoreMask instance_view_mask(Segmenter& segmenter, const CameraView& view, std::span<const Pixel> pixels,
                                    const SegmenterConfig& cfg) {
  const ViewPrompts prompts = make_view_prompts(pixels, view, cfg.window);
  if (cfg.mode == PromptMode::SingleCombined) {
    ScoreMask m = segmenter.segment_combined(view, prompts.foreground, prompts.background);
    check_mask(m, view);
    return m;
  }
  ScoreMask fg = segmenter.segment(view, prompts.foreground);
  check_mask(fg, view);
  std::vector<ScoreMask> bgs;
  bgs.reserve(prompts.background.size());
  for (const auto& p : prompts.background) {
    bgs.push_back(segmenter.segment(view, p));
    check_mask(bgs.back(), view);
  }
  return merge_masks(fg, bgs, cfg.beta);
}

}  // namespace boxrefine
