#pragma once

// Superpoints: Felzenszwalb-Huttenlocher graph segmentation over a k-nearest
// neighbour graph whose edge weights measure normal disagreement.

#include <algorithm>
#include <map>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>
#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

#include "boxrefine/error.hpp"
#include "boxrefine/scene.hpp"

namespace boxrefine {

struct SegParams {
  int knn = 10;
  double threshold_k = 0.05;
  int min_size = 20;
};

struct GraphEdge {
  std::int32_t i = 0;
  std::int32_t j = 0;
  double w = 0.0;

  bool operator==(const GraphEdge&) const = default;
};

/// Undirected graph, each pair stored once with i < j.
struct PointGraph {
  std::int32_t node_count = 0;
  std::vector<GraphEdge> edges;
};

/// k nearest neighbours of every point (self excluded), ordered by
/// (distance, index).
inline std::vector<std::vector<std::int32_t>> knn_indices(const std::vector<Point3>& points, int k) {
  namespace bg = boost::geometry;
  namespace bgi = boost::geometry::index;
  using BPoint = bg::model::point<float, 3, bg::cs::cartesian>;
  using Value = std::pair<BPoint, std::int32_t>;

  std::vector<std::vector<std::int32_t>> out(points.size());
  if (points.empty() || k < 1) return out;
  std::vector<Value> values;
  values.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    values.emplace_back(BPoint(points[i].x(), points[i].y(), points[i].z()), static_cast<std::int32_t>(i));
  }
  const bgi::rtree<Value, bgi::rstar<16>> tree(values.begin(), values.end());

  // A few extra candidates so equidistant neighbours resolve by index.
  const auto want = static_cast<unsigned>(k + 1 + 4);
  std::vector<Value> hits;
  std::vector<std::pair<double, std::int32_t>> ranked;
  for (std::size_t i = 0; i < points.size(); ++i) {
    hits.clear();
    tree.query(bgi::nearest(values[i].first, want), std::back_inserter(hits));
    ranked.clear();
    for (const auto& h : hits) {
      if (h.second == static_cast<std::int32_t>(i)) continue;
      ranked.emplace_back((points[static_cast<std::size_t>(h.second)] - points[i]).cast<double>().squaredNorm(),
                          h.second);
    }
    std::sort(ranked.begin(), ranked.end());
    const std::size_t take = std::min(ranked.size(), static_cast<std::size_t>(k));
    out[i].reserve(take);
    for (std::size_t r = 0; r < take; ++r) out[i].push_back(ranked[r].second);
  }
  return out;
}

struct NormalEstimate {
  std::vector<Point3> normals;
  /// 1 where the neighbourhood spans fewer than two directions; normal is +z there.
  std::vector<char> degenerate;
};

/// Orients a normal toward +z; normals perpendicular to z fall back to +x, then +y.
inline Eigen::Vector3d orient_normal(Eigen::Vector3d n) {
  constexpr double eps = 1e-6;
  for (int a : {2, 0, 1}) {
    if (n[a] > eps) return n;
    if (n[a] < -eps) return -n;
  }
  return n;
}

/// PCA normals: eigenvector of the smallest covariance eigenvalue over each
/// point together with its knn nearest neighbours.
inline NormalEstimate estimate_normals(const std::vector<Point3>& points, int knn) {
  NormalEstimate est;
  est.normals.assign(points.size(), Point3::UnitZ());
  est.degenerate.assign(points.size(), 0);
  const auto nbrs = knn_indices(points, knn);
  for (std::size_t i = 0; i < points.size(); ++i) {
    Eigen::Vector3d mean = points[i].cast<double>();
    for (auto j : nbrs[i]) mean += points[static_cast<std::size_t>(j)].cast<double>();
    const double count = static_cast<double>(nbrs[i].size() + 1);
    mean /= count;
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    auto accumulate = [&](const Point3& p) {
      const Eigen::Vector3d d = p.cast<double>() - mean;
      cov += d * d.transpose();
    };
    accumulate(points[i]);
    for (auto j : nbrs[i]) accumulate(points[static_cast<std::size_t>(j)]);
    cov /= count;

    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
    const Eigen::Vector3d ev = solver.eigenvalues();  // ascending
    if (!(ev[2] > 0.0) || ev[1] <= 1e-12 * ev[2]) {
      est.degenerate[i] = 1;
      continue;
    }
    est.normals[i] = orient_normal(solver.eigenvectors().col(0).normalized()).cast<float>();
  }
  return est;
}

/// Connects every point to its knn neighbours; weight 1 - |n_i . n_j|.
inline PointGraph build_normal_graph(const std::vector<Point3>& points, const std::vector<Point3>& normals,
                                     int knn) {
  if (normals.size() != points.size()) {
    throw PreconditionError("build_normal_graph: normals and points differ in length");
  }
  PointGraph g;
  g.node_count = static_cast<std::int32_t>(points.size());
  const auto nbrs = knn_indices(points, knn);
  std::vector<std::pair<std::int32_t, std::int32_t>> pairs;
  pairs.reserve(points.size() * static_cast<std::size_t>(std::max(knn, 0)));
  for (std::size_t i = 0; i < nbrs.size(); ++i) {
    const auto a = static_cast<std::int32_t>(i);
    for (auto b : nbrs[i]) pairs.emplace_back(std::min(a, b), std::max(a, b));
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  g.edges.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    const double dot = normals[static_cast<std::size_t>(a)].cast<double>().dot(
        normals[static_cast<std::size_t>(b)].cast<double>());
    g.edges.push_back({a, b, std::max(0.0, 1.0 - std::abs(dot))});
  }
  return g;
}

namespace sp_detail {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), size_(n, 1), internal_(n, 0.0) {
    std::iota(parent_.begin(), parent_.end(), std::int32_t{0});
  }

  std::int32_t find(std::int32_t x) {
    while (parent_[static_cast<std::size_t>(x)] != x) {
      auto& p = parent_[static_cast<std::size_t>(x)];
      p = parent_[static_cast<std::size_t>(p)];
      x = p;
    }
    return x;
  }

  std::int32_t join(std::int32_t a, std::int32_t b, double w) {
    if (size_[static_cast<std::size_t>(a)] < size_[static_cast<std::size_t>(b)]) std::swap(a, b);
    parent_[static_cast<std::size_t>(b)] = a;
    size_[static_cast<std::size_t>(a)] += size_[static_cast<std::size_t>(b)];
    internal_[static_cast<std::size_t>(a)] =
        std::max({internal_[static_cast<std::size_t>(a)], internal_[static_cast<std::size_t>(b)], w});
    return a;
  }

  std::int32_t size(std::int32_t root) const { return size_[static_cast<std::size_t>(root)]; }
  double internal(std::int32_t root) const { return internal_[static_cast<std::size_t>(root)]; }

 private:
  std::vector<std::int32_t> parent_;
  std::vector<std::int32_t> size_;
  std::vector<double> internal_;
};

}  // namespace sp_detail

/// Graph segmentation: edges ascending by (w, i, j); components C1, C2 merge
/// when w <= min(Int(C1) + k/|C1|, Int(C2) + k/|C2|). A second pass over the
/// same order absorbs components below min_size into their cheapest neighbour.
/// Superpoint ids are numbered by first occurrence in point order.
inline SuperpointPartition fh_segment(const PointGraph& graph, const SegParams& params) {
  if (!(params.threshold_k > 0.0) || params.min_size < 1) {
    throw PreconditionError("fh_segment: threshold_k must be > 0 and min_size >= 1");
  }
  const auto n = static_cast<std::size_t>(graph.node_count);
  std::vector<GraphEdge> edges = graph.edges;
  std::sort(edges.begin(), edges.end(), [](const GraphEdge& a, const GraphEdge& b) {
    return std::tie(a.w, a.i, a.j) < std::tie(b.w, b.i, b.j);
  });

  sp_detail::DisjointSets sets(n);
  const double k = params.threshold_k;
  for (const auto& e : edges) {
    const auto a = sets.find(e.i);
    const auto b = sets.find(e.j);
    if (a == b) continue;
    const double ta = sets.internal(a) + k / sets.size(a);
    const double tb = sets.internal(b) + k / sets.size(b);
    if (e.w <= std::min(ta, tb)) sets.join(a, b, e.w);
  }
  for (const auto& e : edges) {
    const auto a = sets.find(e.i);
    const auto b = sets.find(e.j);
    if (a != b && (sets.size(a) < params.min_size || sets.size(b) < params.min_size)) {
      sets.join(a, b, e.w);
    }
  }

  SuperpointPartition out;
  out.assignment.assign(n, -1);
  std::vector<std::int32_t> dense(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto root = static_cast<std::size_t>(sets.find(static_cast<std::int32_t>(i)));
    if (dense[root] < 0) dense[root] = out.superpoint_count++;
    out.assignment[i] = dense[root];
  }
  return out;
}

/// Superpoints for a scene, using its stored normals when present.
inline SuperpointPartition compute_superpoints(const Scene& scene, const SegParams& params) {
  if (params.knn < 1) throw PreconditionError("superpoints: knn must be >= 1");
  const std::vector<Point3> normals =
      scene.normals.empty() ? estimate_normals(scene.points, std::max(params.knn, 3)).normals : scene.normals;
  return fh_segment(build_normal_graph(scene.points, normals, params.knn), params);
}

/// Splits every superpoint by `labels` so no superpoint mixes two labels.
/// New ids are dense, in order of first occurrence.
inline SuperpointPartition split_by_labels(const SuperpointPartition& sp, const std::vector<InstanceId>& labels) {
  if (labels.size() != sp.assignment.size()) throw PreconditionError("split_by_labels: length mismatch");
  std::map<std::pair<std::int32_t, InstanceId>, std::int32_t> ids;
  SuperpointPartition out;
  out.assignment.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto [it, fresh] = ids.try_emplace({sp.assignment[i], labels[i]}, static_cast<std::int32_t>(ids.size()));
    out.assignment[i] = it->second;
  }
  out.superpoint_count = static_cast<std::int32_t>(ids.size());
  return out;
}

}  // namespace boxrefine
