#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace boxrefine {

/// World-space position, stored at the bundle's float32 precision.
using Point3 = Eigen::Vector3f;

using InstanceId = std::int32_t;

/// Label for points that belong to no annotated instance.
inline constexpr InstanceId kBackground = -1;

struct InstanceBox {
  InstanceId instance_id = 0;
  std::int32_t semantic_class = 0;
  Point3 c_min = Point3::Zero();
  Point3 c_max = Point3::Zero();

  bool contains(const Point3& p) const {
    return (p.array() >= c_min.array()).all() && (p.array() <= c_max.array()).all();
  }
  bool contains(const InstanceBox& other) const {
    return (other.c_min.array() >= c_min.array()).all() &&
           (other.c_max.array() <= c_max.array()).all();
  }
  double volume() const {
    const Eigen::Vector3d e = (c_max - c_min).cast<double>();
    return e.x() * e.y() * e.z();
  }

  bool operator==(const InstanceBox&) const = default;
};

struct SuperpointPartition {
  std::vector<std::int32_t> assignment;
  std::int32_t superpoint_count = 0;

  /// Point indices per superpoint, each list ascending.
  std::vector<std::vector<std::int32_t>> members() const {
    std::vector<std::vector<std::int32_t>> out(static_cast<std::size_t>(superpoint_count));
    for (std::size_t i = 0; i < assignment.size(); ++i) {
      out[static_cast<std::size_t>(assignment[i])].push_back(static_cast<std::int32_t>(i));
    }
    return out;
  }

  bool operator==(const SuperpointPartition&) const = default;
};

/// Final per-point instance assignment; one label per point by construction.
struct LabelMap {
  std::vector<InstanceId> labels;

  std::size_t size() const { return labels.size(); }
  InstanceId operator[](std::size_t i) const { return labels[i]; }

  bool operator==(const LabelMap&) const = default;
};

using Matrix34d = Eigen::Matrix<double, 3, 4>;

/// One RGB-D frame: intrinsics K, world-to-camera extrinsics P and the depth
/// image in meters (row-major, 0 marks an invalid pixel).
struct CameraView {
  std::int32_t id = 0;
  std::int32_t width = 0;
  std::int32_t height = 0;
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  Matrix34d P = Matrix34d::Identity();
  std::vector<float> depth;
  double depth_scale_mm_per_unit = 1.0;
  /// Optional interleaved 8-bit RGB, 3 * width * height bytes.
  std::vector<std::uint8_t> rgb;

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  float depth_at(int x, int y) const {
    return depth[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                 static_cast<std::size_t>(x)];
  }

  bool operator==(const CameraView&) const = default;
};

/// Converts a metric depth to the value the 16-bit depth storage can represent,
/// so in-memory depth survives a save/load cycle unchanged.
inline float quantize_depth(double meters, double scale_mm_per_unit) {
  if (!(meters > 0.0)) return 0.0f;
  const double units = std::nearbyint(meters * 1000.0 / scale_mm_per_unit);
  if (units < 1.0 || units > 65535.0) return 0.0f;
  return static_cast<float>(units * scale_mm_per_unit / 1000.0);
}

struct Scene {
  std::vector<Point3> points;
  std::vector<Point3> normals;
  std::vector<Point3> colors;
  std::vector<InstanceId> gt_labels;
  std::vector<CameraView> views;
  std::vector<InstanceBox> boxes;
  std::optional<SuperpointPartition> superpoints;

  std::size_t point_count() const { return points.size(); }
  bool has_gt() const { return !gt_labels.empty(); }

  bool operator==(const Scene&) const = default;
};

using ValidationReport = std::vector<std::string>;

/// Lists every violated invariant; empty iff the scene is well formed.
inline ValidationReport validate_scene(const Scene& scene) {
  ValidationReport report;
  const std::size_t n = scene.points.size();
  auto note = [&report](std::string s) { report.push_back(std::move(s)); };

  for (std::size_t i = 0; i < n; ++i) {
    if (!scene.points[i].allFinite()) note("point " + std::to_string(i) + ": non-finite coordinate");
  }
  if (!scene.normals.empty()) {
    if (scene.normals.size() != n) {
      note("normals: length " + std::to_string(scene.normals.size()) + " != point count " +
           std::to_string(n));
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const float len = scene.normals[i].norm();
        if (!std::isfinite(len) || std::abs(len - 1.0f) > 1e-3f) {
          note("normal " + std::to_string(i) + ": not unit length (norm " + std::to_string(len) + ")");
        }
      }
    }
  }
  if (!scene.colors.empty()) {
    if (scene.colors.size() != n) {
      note("colors: length " + std::to_string(scene.colors.size()) + " != point count " +
           std::to_string(n));
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const auto& c = scene.colors[i];
        if (!((c.array() >= 0.0f).all() && (c.array() <= 1.0f).all())) {
          note("color " + std::to_string(i) + ": outside [0,1]");
        }
      }
    }
  }
  if (scene.has_gt() && scene.gt_labels.size() != n) {
    note("gt_labels: length " + std::to_string(scene.gt_labels.size()) + " != point count " +
         std::to_string(n));
  }

  for (std::size_t b = 0; b < scene.boxes.size(); ++b) {
    const auto& box = scene.boxes[b];
    const std::string tag = "box " + std::to_string(b) + " (instance " +
                            std::to_string(box.instance_id) + ")";
    if (!box.c_min.allFinite() || !box.c_max.allFinite()) note(tag + ": non-finite corner");
    for (int a = 0; a < 3; ++a) {
      if (box.c_min[a] > box.c_max[a]) {
        note(tag + ": c_min." + "xyz"[a] + " > c_max." + "xyz"[a]);
      }
    }
    if (scene.has_gt() && scene.gt_labels.size() == n) {
      bool found = false;
      for (InstanceId l : scene.gt_labels) {
        if (l == box.instance_id) {
          found = true;
          break;
        }
      }
      if (!found) note(tag + ": instance absent from gt_labels");
    }
  }

  if (scene.superpoints) {
    const auto& sp = *scene.superpoints;
    if (sp.assignment.size() != n) {
      note("superpoints: length " + std::to_string(sp.assignment.size()) + " != point count " +
           std::to_string(n));
    } else {
      std::vector<char> used(static_cast<std::size_t>(std::max(sp.superpoint_count, 0)), 0);
      for (std::size_t i = 0; i < n; ++i) {
        const auto id = sp.assignment[i];
        if (id < 0 || id >= sp.superpoint_count) {
          note("superpoint id of point " + std::to_string(i) + " out of range");
        } else {
          used[static_cast<std::size_t>(id)] = 1;
        }
      }
      for (std::size_t s = 0; s < used.size(); ++s) {
        if (!used[s]) note("superpoint " + std::to_string(s) + " is empty");
      }
    }
  }

  for (const auto& v : scene.views) {
    const std::string tag = "view " + std::to_string(v.id);
    if (v.width <= 0 || v.height <= 0) note(tag + ": non-positive image size");
    if (v.K(2, 2) != 1.0 || v.K(1, 0) != 0.0 || v.K(2, 0) != 0.0 || v.K(2, 1) != 0.0) {
      note(tag + ": K is not upper-triangular with K[2][2] = 1");
    }
    if (!(v.K(0, 0) > 0.0) || !(v.K(1, 1) > 0.0)) note(tag + ": non-positive focal length");
    if (v.depth.size() != v.pixel_count()) {
      note(tag + ": depth size mismatch");
    } else {
      for (float d : v.depth) {
        if (!(d >= 0.0f)) {
          note(tag + ": negative or NaN depth");
          break;
        }
      }
    }
    if (!v.rgb.empty() && v.rgb.size() != 3 * v.pixel_count()) note(tag + ": rgb size mismatch");
  }
  return report;
}

}  // namespace boxrefine
