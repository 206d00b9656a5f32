#pragma once

// Procedural desk-scale rooms with ground truth: a box-shaped room shell
// (background), axis-aligned cuboids and upright cylinders (instances),
// cameras orbiting inside the room, and depth maps rendered from the points.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "boxrefine/box_noise.hpp"
#include "boxrefine/bundle_io.hpp"
#include "boxrefine/camera.hpp"
#include "boxrefine/error.hpp"
#include "boxrefine/rng.hpp"
#include "boxrefine/scene.hpp"

namespace boxrefine {

struct SynthConfig {
  std::uint64_t seed = 0;
  double room_width = 4.0;   // x
  double room_depth = 4.0;   // y
  double room_height = 2.5;  // z
  int object_count = 4;
  double points_per_m2 = 1600.0;
  int view_count = 12;
  /// Stack some objects on top of others so they occlude and nest.
  bool occlusion = true;
  double stack_probability = 0.5;
  /// Floor objects keep at least this distance between their footprint and
  /// the camera orbit, so the floor around them stays in view.
  double edge_clearance = 0.6;
  /// Minimum horizontal gap between objects standing on the floor.
  double min_separation = 0.15;
  /// Angular noise applied to the analytic normals, emulating reconstruction noise.
  double normal_noise_deg = 0.0;
  /// Support surfaces (floor, table tops) are left unsampled within this
  /// distance of a resting object's footprint. Without the gap, support
  /// points just behind an object's base pass the depth tolerance of
  /// `visible` while their pixel renders as the object.
  double contact_gap = 0.05;
  /// When > 0, the scene ships superpoints: every sampled face is cut into
  /// square patches of about this size (metres), one superpoint per patch.
  double patch_size = 0.0;
  /// How many of the objects are tables (slab on four legs); their boxes
  /// enclose the floor underneath.
  int table_count = 1;
  int image_width = 256;
  int image_height = 192;
  double focal_px = 200.0;
  double camera_height = 1.6;
  int splat_footprint = 3;
  bool with_rgb = true;
  int max_placement_attempts = 400;
};

enum class ShapeKind { Cuboid, Cylinder, Table };

/// Semantic classes written to the generated boxes.
inline constexpr std::int32_t kClassCuboid = 1;
inline constexpr std::int32_t kClassCylinder = 2;
inline constexpr std::int32_t kClassTable = 3;

inline constexpr double kTableSlab = 0.04;
inline constexpr double kTableLeg = 0.05;
inline constexpr double kTableLegInset = 0.03;

struct SynthObject {
  InstanceId id = 0;
  ShapeKind kind = ShapeKind::Cuboid;
  Eigen::Vector3d center_base;  // centre of the bottom face
  Eigen::Vector3d size;         // x extent, y extent, height; cylinders use size.x() as diameter
  int parent = -1;              // index of the object this one rests on
};

namespace synth_detail {

struct Sampler {
  Rng& rng;
  double spacing;
  std::vector<Point3>& points;
  std::vector<Point3>& normals;
  std::vector<InstanceId>& labels;
  double normal_sigma;
  double patch_size;
  std::vector<std::int32_t> patches{};
  std::int32_t next_patch = 0;

  void emit(const Eigen::Vector3d& p, Eigen::Vector3d n, InstanceId label, std::int32_t patch) {
    if (normal_sigma > 0.0) {
      n += normal_sigma * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
      n.normalize();
    }
    points.push_back(p.cast<float>());
    normals.push_back(n.cast<float>());
    labels.push_back(label);
    patches.push_back(patch);
  }

  int patch_cells(double len) const {
    return patch_size > 0.0 ? std::max(1, static_cast<int>(std::lround(len / patch_size))) : 1;
  }

  /// Jittered grid over origin + s*u + t*v, s in [0, len_u], t in [0, len_v].
  template <typename Keep>
  void rect(const Eigen::Vector3d& origin, const Eigen::Vector3d& u, double len_u, const Eigen::Vector3d& v,
            double len_v, const Eigen::Vector3d& normal, InstanceId label, Keep&& keep) {
    const int nu = std::max(1, static_cast<int>(std::lround(len_u / spacing)));
    const int nv = std::max(1, static_cast<int>(std::lround(len_v / spacing)));
    const int pu = patch_cells(len_u), pv = patch_cells(len_v);
    for (int i = 0; i < nu; ++i) {
      for (int j = 0; j < nv; ++j) {
        const double s = (i + rng.uniform(0.2, 0.8)) * len_u / nu;
        const double t = (j + rng.uniform(0.2, 0.8)) * len_v / nv;
        const Eigen::Vector3d p = origin + s * u + t * v;
        const int cu = std::min(pu - 1, static_cast<int>(s / len_u * pu));
        const int cv = std::min(pv - 1, static_cast<int>(t / len_v * pv));
        if (keep(p)) emit(p, normal, label, next_patch + cu * pv + cv);
      }
    }
    next_patch += pu * pv;
  }
};

inline Eigen::Vector3d footprint_lo(const SynthObject& o) {
  return o.center_base - Eigen::Vector3d(o.size.x() / 2, o.size.y() / 2, 0);
}
inline Eigen::Vector3d footprint_hi(const SynthObject& o) {
  return o.center_base + Eigen::Vector3d(o.size.x() / 2, o.size.y() / 2, o.size.z());
}

/// True if p (on the object's bottom plane) lies under the object's footprint.
/// True when `p` lies over the footprint of `o` grown by `margin`.
inline bool under(const SynthObject& o, const Eigen::Vector3d& p, double margin = 0.0) {
  const double dx = p.x() - o.center_base.x(), dy = p.y() - o.center_base.y();
  if (o.kind == ShapeKind::Cylinder) {
    const double r = o.size.x() / 2 + margin;
    return dx * dx + dy * dy <= r * r;
  }
  if (o.kind == ShapeKind::Table) {
    const double ix = o.size.x() / 2 - kTableLegInset, iy = o.size.y() / 2 - kTableLegInset;
    const double ax = std::abs(dx), ay = std::abs(dy);
    return ax <= ix + margin && ax >= ix - kTableLeg - margin && ay <= iy + margin && ay >= iy - kTableLeg - margin;
  }
  return std::abs(dx) <= o.size.x() / 2 + margin && std::abs(dy) <= o.size.y() / 2 + margin;
}

inline Matrix34d look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target) {
  const Eigen::Vector3d f = (target - eye).normalized();
  const Eigen::Vector3d r = f.cross(Eigen::Vector3d::UnitZ()).normalized();
  const Eigen::Vector3d d = f.cross(r);
  Eigen::Matrix3d R;
  R.row(0) = r.transpose();
  R.row(1) = d.transpose();
  R.row(2) = f.transpose();
  Matrix34d P;
  P.leftCols<3>() = R;
  P.col(3) = -R * eye;
  return P;
}

inline std::array<double, 3> instance_color(InstanceId id) {
  static constexpr std::array<std::array<double, 3>, 8> palette{{{0.85, 0.25, 0.2},
                                                                  {0.2, 0.6, 0.85},
                                                                  {0.3, 0.75, 0.3},
                                                                  {0.9, 0.7, 0.15},
                                                                  {0.6, 0.3, 0.75},
                                                                  {0.95, 0.5, 0.6},
                                                                  {0.2, 0.7, 0.65},
                                                                  {0.55, 0.4, 0.25}}};
  if (id == kBackground) return {0.7, 0.7, 0.68};
  return palette[static_cast<std::size_t>(id - 1) % palette.size()];
}

}  // namespace synth_detail

inline void check_config(const SynthConfig& cfg) {
  if (!(cfg.room_width > 0 && cfg.room_depth > 0 && cfg.room_height > 0)) {
    throw PreconditionError("synth: room dimensions must be positive");
  }
  if (cfg.object_count < 1) throw PreconditionError("synth: object_count must be >= 1");
  if (cfg.view_count < 1) throw PreconditionError("synth: view_count must be >= 1");
  if (!(cfg.points_per_m2 > 0)) throw PreconditionError("synth: points_per_m2 must be positive");
  if (!(cfg.contact_gap >= 0) || !(cfg.patch_size >= 0) || !(cfg.normal_noise_deg >= 0)) {
    throw PreconditionError("synth: contact_gap, patch_size and normal_noise_deg must be >= 0");
  }
  if (cfg.image_width < 1 || cfg.image_height < 1 || !(cfg.focal_px > 0)) {
    throw PreconditionError("synth: invalid camera parameters");
  }
}

/// One layout attempt; nullopt when some object found no spot.
inline std::optional<std::vector<SynthObject>> try_place_objects(const SynthConfig& cfg, Rng& rng) {
  using synth_detail::footprint_hi;
  using synth_detail::footprint_lo;
  const Eigen::Vector3d centre(cfg.room_width / 2, cfg.room_depth / 2, 0);
  const double orbit = 0.42 * std::min(cfg.room_width, cfg.room_depth);
  const double region = std::max(0.3, orbit - cfg.edge_clearance);

  std::vector<SynthObject> objs;
  for (int k = 0; k < cfg.object_count; ++k) {
    SynthObject o;
    o.id = k + 1;
    bool placed = false;
    auto try_stack = [&] {
      for (std::size_t pi = 0; pi < objs.size() && !placed; ++pi) {
        const auto& parent = objs[pi];
        if (parent.kind == ShapeKind::Cylinder || parent.parent >= 0) continue;
        bool has_child = false;
        for (const auto& other : objs) has_child = has_child || other.parent == static_cast<int>(pi);
        if (has_child) continue;
        const double room_x = parent.size.x() - 0.12, room_y = parent.size.y() - 0.12;
        if (room_x < 0.14 || room_y < 0.14) continue;
        o.kind = rng.bernoulli(0.5) ? ShapeKind::Cuboid : ShapeKind::Cylinder;
        const double sx = rng.uniform(0.14, std::min(0.32, room_x));
        const double sy = o.kind == ShapeKind::Cylinder ? sx : rng.uniform(0.14, std::min(0.32, room_y));
        if (sy > room_y) continue;
        o.size = {sx, sy, rng.uniform(0.12, 0.3)};
        const double jx = (room_x - sx) / 2, jy = (room_y - sy) / 2;
        o.center_base = parent.center_base + Eigen::Vector3d(rng.uniform(-jx, jx), rng.uniform(-jy, jy), parent.size.z());
        o.parent = static_cast<int>(pi);
        placed = true;
      }
    };
    if (cfg.occlusion && k > 0 && rng.bernoulli(cfg.stack_probability)) try_stack();
    for (int attempt = 0; attempt < cfg.max_placement_attempts && !placed; ++attempt) {
      o.kind = k < cfg.table_count ? ShapeKind::Table
               : rng.bernoulli(0.6) ? ShapeKind::Cuboid
                                    : ShapeKind::Cylinder;
      if (o.kind == ShapeKind::Table) {
        o.size = {rng.uniform(0.8, 1.2), rng.uniform(0.5, 0.75), rng.uniform(0.6, 0.75)};
      } else if (o.kind == ShapeKind::Cuboid) {
        o.size = {rng.uniform(0.3, 0.75), rng.uniform(0.3, 0.75), rng.uniform(0.25, 0.8)};
      } else {
        const double d = rng.uniform(0.25, 0.5);
        o.size = {d, d, rng.uniform(0.3, 0.8)};
      }
      const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double rad = region * std::sqrt(rng.uniform());
      o.center_base = centre + Eigen::Vector3d(rad * std::cos(ang), rad * std::sin(ang), 0.0);
      o.parent = -1;
      bool ok = true;
      for (double sx : {-0.5, 0.5}) {
        for (double sy : {-0.5, 0.5}) {
          const Eigen::Vector3d corner = o.center_base + Eigen::Vector3d(sx * o.size.x(), sy * o.size.y(), 0.0);
          ok = ok && (corner - centre).norm() <= region;
        }
      }
      for (const auto& other : objs) {
        if (other.parent >= 0) continue;
        const Eigen::Vector3d alo = footprint_lo(o), ahi = footprint_hi(o);
        const Eigen::Vector3d blo = footprint_lo(other), bhi = footprint_hi(other);
        const double gap_x = std::max(blo.x() - ahi.x(), alo.x() - bhi.x());
        const double gap_y = std::max(blo.y() - ahi.y(), alo.y() - bhi.y());
        if (std::max(gap_x, gap_y) < cfg.min_separation) {
          ok = false;
          break;
        }
      }
      placed = ok;
    }
    // A crowded floor still has room on top of free cuboids and tables.
    if (!placed && cfg.occlusion) try_stack();
    if (!placed) return std::nullopt;
    objs.push_back(o);
  }
  return objs;
}

/// Lays out objects: floor objects inside the disc the cameras orbit around,
/// kept min_separation apart; stacked objects centred on a cuboid's top face.
/// Early large objects can crowd out later ones, so a failed layout restarts.
inline std::vector<SynthObject> place_objects(const SynthConfig& cfg, Rng& rng) {
  constexpr int kLayouts = 20;
  for (int i = 0; i < kLayouts; ++i) {
    if (auto objs = try_place_objects(cfg, rng)) return *std::move(objs);
  }
  throw Error("synth: could not place " + std::to_string(cfg.object_count) + " objects after bounded retries");
}

/// Orbiting cameras at camera_height, all looking at the room centre.
inline std::vector<CameraView> make_views(const SynthConfig& cfg, Rng& rng) {
  std::vector<CameraView> views;
  const Eigen::Vector3d centre(cfg.room_width / 2, cfg.room_depth / 2, 0);
  const double orbit = 0.42 * std::min(cfg.room_width, cfg.room_depth);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  for (int i = 0; i < cfg.view_count; ++i) {
    CameraView v;
    v.id = i;
    v.width = cfg.image_width;
    v.height = cfg.image_height;
    v.K << cfg.focal_px, 0, cfg.image_width / 2.0, 0, cfg.focal_px, cfg.image_height / 2.0, 0, 0, 1;
    const double ang = phase + 2.0 * std::numbers::pi * i / cfg.view_count + rng.uniform(-0.1, 0.1);
    const double r = orbit * rng.uniform(0.9, 1.0);
    const Eigen::Vector3d eye = centre + Eigen::Vector3d(r * std::cos(ang), r * std::sin(ang),
                                                         cfg.camera_height + rng.uniform(-0.15, 0.15));
    const Eigen::Vector3d target =
        centre + Eigen::Vector3d(rng.uniform(-0.25, 0.25), rng.uniform(-0.25, 0.25), rng.uniform(0.2, 0.45));
    v.P = synth_detail::look_at(eye, target);
    v.depth_scale_mm_per_unit = 1.0;
    views.push_back(std::move(v));
  }
  return views;
}

/// Fills depth (and rgb) of every view by splatting the scene's points.
inline void render_views(Scene& scene, int footprint, bool with_rgb) {
  for (auto& v : scene.views) {
    const GtRender r = render_gt(scene, v, footprint);
    v.depth.resize(v.pixel_count());
    for (std::size_t i = 0; i < v.depth.size(); ++i) v.depth[i] = quantize_depth(r.depth[i], v.depth_scale_mm_per_unit);
    v.rgb.clear();
    if (with_rgb && !scene.colors.empty()) {
      v.rgb.assign(3 * v.pixel_count(), 0);
      for (std::size_t i = 0; i < v.pixel_count(); ++i) {
        if (r.owner[i] < 0) continue;
        const Point3& c = scene.colors[static_cast<std::size_t>(r.owner[i])];
        for (int ch = 0; ch < 3; ++ch) {
          v.rgb[3 * i + static_cast<std::size_t>(ch)] =
              static_cast<std::uint8_t>(std::lround(std::clamp(c[ch], 0.0f, 1.0f) * 255.0f));
        }
      }
    }
  }
}

inline Scene generate_scene(const SynthConfig& cfg) {
  using synth_detail::under;
  check_config(cfg);
  Rng rng(cfg.seed);
  const auto objects = place_objects(cfg, rng);

  Scene scene;
  const double spacing = 1.0 / std::sqrt(cfg.points_per_m2);
  const double sigma = std::tan(cfg.normal_noise_deg * std::numbers::pi / 180.0);
  synth_detail::Sampler s{rng, spacing, scene.points, scene.normals, scene.gt_labels, sigma, cfg.patch_size};
  const Eigen::Vector3d ex = Eigen::Vector3d::UnitX(), ey = Eigen::Vector3d::UnitY(), ez = Eigen::Vector3d::UnitZ();
  const double W = cfg.room_width, D = cfg.room_depth, H = cfg.room_height;
  auto always = [](const Eigen::Vector3d&) { return true; };

  // Room shell. The floor skips footprints of objects standing on it.
  s.rect({0, 0, 0}, ex, W, ey, D, ez, kBackground, [&](const Eigen::Vector3d& p) {
    for (const auto& o : objects) {
      if (o.parent < 0 && under(o, p, cfg.contact_gap)) return false;
    }
    return true;
  });
  s.rect({0, 0, H}, ex, W, ey, D, -ez, kBackground, always);
  s.rect({0, 0, 0}, ex, W, ez, H, ey, kBackground, always);
  s.rect({0, D, 0}, ex, W, ez, H, -ey, kBackground, always);
  s.rect({0, 0, 0}, ey, D, ez, H, ex, kBackground, always);
  s.rect({W, 0, 0}, ey, D, ez, H, -ex, kBackground, always);

  for (std::size_t k = 0; k < objects.size(); ++k) {
    const auto& o = objects[k];
    const Eigen::Vector3d lo = synth_detail::footprint_lo(o);
    const double top = o.center_base.z() + o.size.z();
    auto top_keep = [&](const Eigen::Vector3d& p) {
      for (const auto& c : objects) {
        if (c.parent == static_cast<int>(k) && under(c, p, cfg.contact_gap)) return false;
      }
      return true;
    };
    if (o.kind == ShapeKind::Table) {
      const double sx = o.size.x(), sy = o.size.y(), sz = o.size.z();
      const double under_z = top - kTableSlab;
      auto off_legs = [&](const Eigen::Vector3d& p) {
        return !under(o, Eigen::Vector3d(p.x(), p.y(), o.center_base.z()));
      };
      s.rect({lo.x(), lo.y(), top}, ex, sx, ey, sy, ez, o.id, top_keep);
      s.rect({lo.x(), lo.y(), under_z}, ex, sx, ey, sy, -ez, o.id, off_legs);
      s.rect({lo.x(), lo.y(), under_z}, ex, sx, ez, kTableSlab, -ey, o.id, always);
      s.rect({lo.x(), lo.y() + sy, under_z}, ex, sx, ez, kTableSlab, ey, o.id, always);
      s.rect({lo.x(), lo.y(), under_z}, ey, sy, ez, kTableSlab, -ex, o.id, always);
      s.rect({lo.x() + sx, lo.y(), under_z}, ey, sy, ez, kTableSlab, ex, o.id, always);
      for (int cx : {0, 1}) {
        for (int cy : {0, 1}) {
          const double x0 = cx ? lo.x() + sx - kTableLegInset - kTableLeg : lo.x() + kTableLegInset;
          const double y0 = cy ? lo.y() + sy - kTableLegInset - kTableLeg : lo.y() + kTableLegInset;
          const Eigen::Vector3d leg(x0, y0, o.center_base.z());
          const double lh = under_z - o.center_base.z();
          s.rect(leg, ex, kTableLeg, ez, lh, -ey, o.id, always);
          s.rect(leg + kTableLeg * ey, ex, kTableLeg, ez, lh, ey, o.id, always);
          s.rect(leg, ey, kTableLeg, ez, lh, -ex, o.id, always);
          s.rect(leg + kTableLeg * ex, ey, kTableLeg, ez, lh, ex, o.id, always);
        }
      }
    } else if (o.kind == ShapeKind::Cuboid) {
      const double sx = o.size.x(), sy = o.size.y(), sz = o.size.z();
      s.rect({lo.x(), lo.y(), top}, ex, sx, ey, sy, ez, o.id, top_keep);
      s.rect(lo, ex, sx, ez, sz, -ey, o.id, always);
      s.rect(lo + Eigen::Vector3d(0, sy, 0), ex, sx, ez, sz, ey, o.id, always);
      s.rect(lo, ey, sy, ez, sz, -ex, o.id, always);
      s.rect(lo + Eigen::Vector3d(sx, 0, 0), ey, sy, ez, sz, ex, o.id, always);
    } else {
      const double r = o.size.x() / 2, h = o.size.z();
      const double circ = 2.0 * std::numbers::pi * r;
      const int nu = std::max(8, static_cast<int>(std::lround(circ / spacing)));
      const int nv = std::max(1, static_cast<int>(std::lround(h / spacing)));
      const int pu = s.patch_cells(circ), pv = s.patch_cells(h);
      for (int i = 0; i < nu; ++i) {
        for (int j = 0; j < nv; ++j) {
          const double fa = (i + rng.uniform(0.2, 0.8)) / nu;
          const double fz = (j + rng.uniform(0.2, 0.8)) / nv;
          const double a = 2.0 * std::numbers::pi * fa;
          const Eigen::Vector3d n(std::cos(a), std::sin(a), 0.0);
          const int patch = std::min(pu - 1, static_cast<int>(fa * pu)) * pv + std::min(pv - 1, static_cast<int>(fz * pv));
          s.emit(Eigen::Vector3d(o.center_base.x(), o.center_base.y(), o.center_base.z() + fz * h) + r * n, n, o.id,
                 s.next_patch + patch);
        }
      }
      s.next_patch += pu * pv;
      s.rect({lo.x(), lo.y(), top}, ex, o.size.x(), ey, o.size.y(), ez, o.id,
             [&](const Eigen::Vector3d& p) { return under(o, p) && top_keep(p); });
    }
  }

  scene.colors.reserve(scene.points.size());
  const Eigen::Vector3d light = Eigen::Vector3d(0.3, 0.5, 0.8).normalized();
  for (std::size_t i = 0; i < scene.points.size(); ++i) {
    const auto base = synth_detail::instance_color(scene.gt_labels[i]);
    const double shade = 0.6 + 0.4 * std::abs(scene.normals[i].cast<double>().dot(light));
    scene.colors.emplace_back(static_cast<float>(base[0] * shade), static_cast<float>(base[1] * shade),
                              static_cast<float>(base[2] * shade));
  }

  if (cfg.patch_size > 0.0) {
    // Dense ids in order of first occurrence; patches emptied by keep() vanish.
    std::map<std::int32_t, std::int32_t> dense;
    SuperpointPartition sp;
    sp.assignment.reserve(s.patches.size());
    for (auto p : s.patches) {
      sp.assignment.push_back(dense.try_emplace(p, static_cast<std::int32_t>(dense.size())).first->second);
    }
    sp.superpoint_count = static_cast<std::int32_t>(dense.size());
    scene.superpoints = std::move(sp);
  }

  scene.views = make_views(cfg, rng);
  render_views(scene, cfg.splat_footprint, cfg.with_rgb);

  for (const auto& o : objects) {
    InstanceBox b = tight_box(scene, o.id);
    b.semantic_class = o.kind == ShapeKind::Table  ? kClassTable
                       : o.kind == ShapeKind::Cuboid ? kClassCuboid
                                                      : kClassCylinder;
    scene.boxes.push_back(b);
  }
  return scene;
}

/// Writes `count` scenes with seeds base_seed + i under out_dir/scene_XXXX.
inline std::vector<std::filesystem::path> generate_suite(int count, const SynthConfig& tmpl, std::uint64_t base_seed,
                                                         const std::filesystem::path& out_dir) {
  if (count < 1) throw PreconditionError("generate_suite: count must be >= 1");
  std::vector<std::filesystem::path> out;
  for (int i = 0; i < count; ++i) {
    SynthConfig cfg = tmpl;
    cfg.seed = base_seed + static_cast<std::uint64_t>(i);
    char name[32];
    std::snprintf(name, sizeof name, "scene_%04d", i);
    const auto dir = out_dir / name;
    save_scene_bundle(generate_scene(cfg), dir);
    out.push_back(dir);
  }
  return out;
}

}  // namespace boxrefine
