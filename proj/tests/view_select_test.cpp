#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "boxrefine/view_select.hpp"
#include "test_util.hpp"

using namespace boxrefine;
using testing_util::axis_view;

namespace {

/// Size of the smallest set of views covering every coverable candidate, by
/// exhaustive search over subsets.
std::size_t brute_force_optimum(const std::vector<std::int32_t>& cand, const std::vector<ViewVisibility>& vis) {
  std::set<std::int32_t> coverable;
  for (const auto& v : vis) {
    for (auto p : v.points) {
      if (std::find(cand.begin(), cand.end(), p) != cand.end()) coverable.insert(p);
    }
  }
  const std::size_t n = vis.size();
  std::size_t best = n;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    const auto size = static_cast<std::size_t>(std::popcount(mask));
    if (size >= best) continue;
    std::set<std::int32_t> got;
    for (std::size_t v = 0; v < n; ++v) {
      if (!(mask >> v & 1u)) continue;
      for (auto p : vis[v].points) {
        if (coverable.count(p)) got.insert(p);
      }
    }
    if (got == coverable) best = size;
  }
  return coverable.empty() ? 0 : best;
}

/// A 2x1 image looking down +z; pixel 0 sees x < 0, pixel 1 sees x >= 0.
struct TinyWorld {
  Scene scene;
  TinyWorld() {
    scene.points = {Point3(-0.5f, 0, 1), Point3(0.5f, 0, 1), Point3(0.5f, 0, 2), Point3(0, 0, -1)};
    auto v = axis_view(0, 2, 1, 1, 0.5, 0);
    v.depth = {1.0f, 1.0f};
    scene.views.push_back(v);
  }
};

}  // namespace

TEST(GreedySelectViews, HandSimulatedExample) {
  const std::vector<std::int32_t> cand = {1, 2, 3};
  const std::vector<ViewVisibility> vis = {{1, {1, 2}}, {2, {3}}, {3, {2, 3}}};
  const auto sel = greedy_select_views(cand, vis);
  EXPECT_EQ(sel.views, (std::vector<std::int32_t>{1, 2}));
  EXPECT_EQ(sel.gains, (std::vector<std::size_t>{2, 1}));
  EXPECT_TRUE(sel.uncovered.empty());
}

TEST(GreedySelectViews, OneViewSeeingEverything) {
  const auto sel = greedy_select_views({1, 2, 3}, {{0, {1}}, {4, {1, 2, 3}}, {5, {2}}});
  EXPECT_EQ(sel.views, (std::vector<std::int32_t>{4}));
}

TEST(GreedySelectViews, InvisibleCandidateIsReportedUncovered) {
  const auto sel = greedy_select_views({1, 2, 9}, {{0, {1}}, {1, {2}}});
  EXPECT_EQ(sel.views, (std::vector<std::int32_t>{0, 1}));
  EXPECT_EQ(sel.uncovered, (std::vector<std::int32_t>{9}));
}

TEST(GreedySelectViews, NonCandidatesDoNotCount) {
  const auto sel = greedy_select_views({1}, {{0, {5, 6, 7}}, {1, {1}}});
  EXPECT_EQ(sel.views, (std::vector<std::int32_t>{1}));
}

TEST(GreedySelectViews, TiesGoToLowestViewIdWhateverTheInputOrder) {
  const auto sel = greedy_select_views({1, 2}, {{7, {1, 2}}, {3, {1, 2}}, {5, {2, 1}}});
  EXPECT_EQ(sel.views, (std::vector<std::int32_t>{3}));
}

TEST(GreedySelectViews, CapLimitsSelection) {
  const auto sel = greedy_select_views({1, 2, 3}, {{0, {1}}, {1, {2}}, {2, {3}}}, 2);
  EXPECT_EQ(sel.views.size(), 2u);
  EXPECT_EQ(sel.uncovered.size(), 1u);
}

TEST(GreedySelectViews, EmptyCandidatesSelectNothing) {
  const auto sel = greedy_select_views({}, {{0, {1, 2}}});
  EXPECT_TRUE(sel.views.empty());
}

TEST(GreedySelectViews, RandomisedCoverageGainAndBoundProperties) {
  std::mt19937_64 gen(17);
  for (int t = 0; t < 100; ++t) {
    const int nviews = 1 + static_cast<int>(gen() % 8);
    const int npts = 1 + static_cast<int>(gen() % 30);
    std::vector<std::int32_t> cand;
    for (int p = 0; p < npts; ++p) {
      if (gen() % 4) cand.push_back(p);
    }
    std::vector<ViewVisibility> vis;
    for (int v = 0; v < nviews; ++v) {
      ViewVisibility vv{v, {}};
      for (int p = 0; p < npts; ++p) {
        if (gen() % 3 == 0) vv.points.push_back(p);
      }
      vis.push_back(vv);
    }
    const auto sel = greedy_select_views(cand, vis);
    std::set<std::int32_t> covered;
    for (auto id : sel.views) {
      for (auto p : vis[static_cast<std::size_t>(id)].points) covered.insert(p);
    }
    for (auto p : cand) {
      bool coverable = false;
      for (const auto& vv : vis) coverable = coverable || std::count(vv.points.begin(), vv.points.end(), p);
      EXPECT_EQ(covered.count(p) > 0, coverable);
      EXPECT_EQ(std::count(sel.uncovered.begin(), sel.uncovered.end(), p) > 0, !coverable);
    }
    for (std::size_t k = 1; k < sel.gains.size(); ++k) EXPECT_LE(sel.gains[k], sel.gains[k - 1]);
    const auto opt = brute_force_optimum(cand, vis);
    EXPECT_LE(static_cast<double>(sel.views.size()),
              (1.0 + std::log(std::max<double>(1.0, static_cast<double>(cand.size())))) * static_cast<double>(opt) + 1e-9);
  }
}

TEST(VisibleCandidates, BehindCameraIsEmpty) {
  TinyWorld w;
  EXPECT_TRUE(visible_candidates({3}, w.scene, w.scene.views[0]).empty());
}

TEST(VisibleCandidates, FrontalUnoccludedSeesAll) {
  TinyWorld w;
  EXPECT_EQ(visible_candidates({0, 1}, w.scene, w.scene.views[0]), (std::vector<std::int32_t>{0, 1}));
}

TEST(VisibleCandidates, OccludedCandidateExcluded) {
  TinyWorld w;
  EXPECT_EQ(visible_candidates({0, 1, 2}, w.scene, w.scene.views[0]), (std::vector<std::int32_t>{0, 1}));
}

TEST(BuildViewCover, PerInstanceIndependentSelections) {
  // Two views of a single row of points: view 0 sees x < 0, view 1 sees x >= 0.
  Scene s;
  s.points = {Point3(-0.5f, 0, 1), Point3(0.5f, 0, 1), Point3(-0.5f, 0, 1.5f)};
  auto v0 = axis_view(0, 2, 1, 1, 0.5, 0);
  v0.depth = {1.0f, 0.0f};
  auto v1 = axis_view(1, 2, 1, 1, 0.5, 0);
  v1.depth = {0.0f, 1.0f};
  s.views = {v0, v1};
  CandidateMap cm;
  cm.instances = {{1, {}, {0, 1}}, {2, {}, {1}}, {3, {}, {}}, {4, {}, {2}}};
  const auto cover = build_view_cover(cm, s);
  ASSERT_EQ(cover.instances.size(), 4u);
  EXPECT_EQ(cover.instances[0].views, (std::vector<std::int32_t>{0, 1}));
  EXPECT_EQ(cover.instances[0].visible, (std::vector<std::vector<std::int32_t>>{{0}, {1}}));
  EXPECT_EQ(cover.instances[1].views, (std::vector<std::int32_t>{1}));
  EXPECT_TRUE(cover.instances[2].views.empty());
  EXPECT_TRUE(cover.instances[2].uncovered.empty());
  EXPECT_TRUE(cover.instances[3].views.empty());
  EXPECT_EQ(cover.instances[3].uncovered, (std::vector<std::int32_t>{2}));
  EXPECT_EQ(cover.find(2)->views, (std::vector<std::int32_t>{1}));
  EXPECT_TRUE(cover.cache.is_visible(0, cover.cache.view_index(0)));
  EXPECT_FALSE(cover.cache.is_visible(1, cover.cache.view_index(0)));
}

TEST(BuildViewCover, MaxViewsCapApplies) {
  Scene s;
  s.points = {Point3(-0.5f, 0, 1), Point3(0.5f, 0, 1)};
  auto v0 = axis_view(0, 2, 1, 1, 0.5, 0);
  v0.depth = {1.0f, 0.0f};
  auto v1 = axis_view(1, 2, 1, 1, 0.5, 0);
  v1.depth = {0.0f, 1.0f};
  s.views = {v0, v1};
  CandidateMap cm;
  cm.instances = {{1, {}, {0, 1}}};
  const auto cover = build_view_cover(cm, s, {}, 1);
  EXPECT_EQ(cover.instances[0].views, (std::vector<std::int32_t>{0}));
  EXPECT_EQ(cover.instances[0].uncovered, (std::vector<std::int32_t>{1}));
}
