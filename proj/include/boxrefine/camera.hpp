#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "boxrefine/error.hpp"
#include "boxrefine/scene.hpp"

namespace boxrefine {

/// Where a world point lands in a view. `x`/`y` are the rounded pixel indices
/// used for every image lookup; they are meaningful only when in_frame.
struct Projection {
  double pixel_x = 0.0;
  double pixel_y = 0.0;
  double cam_depth = 0.0;
  bool in_frame = false;
  int x = -1;
  int y = -1;

  std::size_t index(int width) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x);
  }
};

/// Depth agreement needed for a point to count as seen by a view:
/// |depth - z| <= max(abs_m, rel * z).
struct VisibilityTolerance {
  double abs_m = 0.02;
  double rel = 0.01;
};

/// Pinhole projection [u v z]^T = K P [X; 1], pixel = (u/z, v/z).
inline Projection project_point(const Point3& point, const CameraView& view) {
  const Eigen::Vector4d homog(point.x(), point.y(), point.z(), 1.0);
  const Eigen::Vector3d uvz = view.K * (view.P * homog);
  Projection out;
  out.cam_depth = uvz.z();
  if (!(uvz.z() > 0.0)) return out;
  out.pixel_x = uvz.x() / uvz.z();
  out.pixel_y = uvz.y() / uvz.z();
  if (!(out.pixel_x >= 0.0 && out.pixel_x < view.width && out.pixel_y >= 0.0 &&
        out.pixel_y < view.height)) {
    return out;
  }
  // Round half to even under the default floating-point environment.
  const double rx = std::nearbyint(out.pixel_x);
  const double ry = std::nearbyint(out.pixel_y);
  if (rx >= view.width || ry >= view.height) return out;
  out.x = static_cast<int>(rx);
  out.y = static_cast<int>(ry);
  out.in_frame = true;
  return out;
}

/// Visibility test on an already computed projection.
inline bool visible(const Projection& proj, const CameraView& view, const VisibilityTolerance& tol = {}) {
  if (!proj.in_frame) return false;
  const double d = view.depth_at(proj.x, proj.y);
  if (!(d > 0.0)) return false;  // sensor hole
  return std::abs(d - proj.cam_depth) <= std::max(tol.abs_m, tol.rel * proj.cam_depth);
}

inline bool visible(const Point3& point, const CameraView& view, const VisibilityTolerance& tol = {}) {
  return visible(project_point(point, view), view, tol);
}

/// Ground-truth raster of a view: nearest instance label, its depth and the
/// index of the point that won each pixel (-1 where nothing landed).
struct GtRender {
  int width = 0;
  int height = 0;
  std::vector<InstanceId> labels;
  std::vector<float> depth;
  std::vector<std::int32_t> owner;

  InstanceId label_at(int x, int y) const {
    return labels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
};

/// Splats every point as a footprint x footprint square around its rounded
/// pixel and keeps the nearest one per pixel. Equal depths keep the lower
/// point index.
inline GtRender render_gt(const Scene& scene, const CameraView& view, int footprint = 3) {
  if (!scene.has_gt()) throw PreconditionError("render_gt: scene has no gt_labels");
  if (footprint < 1) throw PreconditionError("render_gt: footprint must be >= 1");
  GtRender r;
  r.width = view.width;
  r.height = view.height;
  const std::size_t npix = view.pixel_count();
  r.labels.assign(npix, kBackground);
  r.depth.assign(npix, 0.0f);
  r.owner.assign(npix, -1);
  std::vector<double> zbuf(npix, std::numeric_limits<double>::infinity());

  const int lo = -(footprint - 1) / 2;
  const int hi = footprint / 2;
  for (std::size_t i = 0; i < scene.points.size(); ++i) {
    const Projection p = project_point(scene.points[i], view);
    if (!p.in_frame) continue;
    for (int dy = lo; dy <= hi; ++dy) {
      const int y = p.y + dy;
      if (y < 0 || y >= view.height) continue;
      for (int dx = lo; dx <= hi; ++dx) {
        const int x = p.x + dx;
        if (x < 0 || x >= view.width) continue;
        const std::size_t idx = static_cast<std::size_t>(y) * static_cast<std::size_t>(view.width) +
                                static_cast<std::size_t>(x);
        if (p.cam_depth < zbuf[idx]) {
          zbuf[idx] = p.cam_depth;
          r.depth[idx] = static_cast<float>(p.cam_depth);
          r.labels[idx] = scene.gt_labels[i];
          r.owner[idx] = static_cast<std::int32_t>(i);
        }
      }
    }
  }
  return r;
}

}  // namespace boxrefine
