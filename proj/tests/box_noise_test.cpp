#include <random>
#include <set>

#include <gtest/gtest.h>

#include "boxrefine/box_noise.hpp"

using namespace boxrefine;

namespace {

Scene two_instance_scene() {
  Scene s;
  s.points = {Point3(0, 0, 0), Point3(1, 2, 1), Point3(0.5f, 1, 0.5f), Point3(3, 3, 3), Point3(4, 3.5f, 3.2f),
              Point3(9, 9, 9)};
  s.gt_labels = {0, 0, 0, 5, 5, kBackground};
  s.boxes = {{5, 2, Point3(3, 3, 3), Point3(4, 3.5f, 3.2f)}};
  return s;
}

const auto zero_normals = [] { return 0.0; };

}  // namespace

TEST(TightBox, MinMaxOverInstancePoints) {
  const auto b = tight_box(two_instance_scene(), 0);
  EXPECT_EQ(b.c_min, Point3(0, 0, 0));
  EXPECT_EQ(b.c_max, Point3(1, 2, 1));
  EXPECT_EQ(b.instance_id, 0);
}

TEST(TightBox, CopiesSemanticClassFromManifest) {
  EXPECT_EQ(tight_box(two_instance_scene(), 5).semantic_class, 2);
}

TEST(TightBox, SinglePointIsDegenerate) {
  Scene s;
  s.points = {Point3(1, 2, 3)};
  s.gt_labels = {4};
  const auto b = tight_box(s, 4);
  EXPECT_EQ(b.c_min, b.c_max);
}

TEST(TightBox, AbsentInstanceThrows) {
  EXPECT_THROW(tight_box(two_instance_scene(), 3), PreconditionError);
}

TEST(PerturbBox, ZeroLambdaIsIdentity) {
  const InstanceBox b{1, 0, Point3(0, 0, 0), Point3(1, 2, 1)};
  Rng rng(42);
  EXPECT_EQ(perturb_box(b, NoiseConfig{0.0, 42, false}, rng), b);
  EXPECT_EQ(perturb_box(b, NoiseConfig{0.0, 42, true}, rng), b);
}

TEST(PerturbBox, EnlargementWithZeroDraws) {
  const InstanceBox b{1, 0, Point3(0, 0, 0), Point3(1, 2, 1)};
  const auto out = perturb_box(b, NoiseConfig{0.2, 0, false}, zero_normals);
  EXPECT_NEAR(out.c_min.x(), -0.1, 1e-6);
  EXPECT_NEAR(out.c_min.y(), -0.2, 1e-6);
  EXPECT_NEAR(out.c_min.z(), -0.1, 1e-6);
  EXPECT_NEAR(out.c_max.x(), 1.1, 1e-6);
  EXPECT_NEAR(out.c_max.y(), 2.2, 1e-6);
  EXPECT_NEAR(out.c_max.z(), 1.1, 1e-6);
}

TEST(PerturbBox, DrawsScaleWithPerAxisSigma) {
  // Draw sequence +1 for c_min, -1 for c_max: each corner moves by sigma = 0.5 * lambda * lambda * extent.
  const InstanceBox b{1, 0, Point3(0, 0, 0), Point3(1, 2, 4)};
  int k = 0;
  const auto out = perturb_box(b, NoiseConfig{0.2, 0, false}, [&k] { return k++ < 3 ? 1.0 : -1.0; });
  const double s[3] = {0.02, 0.04, 0.08};
  const double grow[3] = {0.2, 0.4, 0.8};
  for (int a = 0; a < 3; ++a) {
    EXPECT_NEAR(out.c_min[a], -0.5 * grow[a] + s[a], 1e-6);
    EXPECT_NEAR(out.c_max[a], b.c_max[a] + 0.5 * grow[a] - s[a], 1e-6);
  }
}

TEST(PerturbBox, ClampKeepsTheTightBoxCovered) {
  const InstanceBox b{1, 0, Point3(0, 0, 0), Point3(1, 1, 1)};
  // inward draws of 10 sigma move each corner 0.45 past the tight box
  int k = 0;
  const auto inward = [&k] { return k++ < 3 ? 10.0 : -10.0; };
  const auto unclamped = perturb_box(b, NoiseConfig{0.3, 0, false}, inward);
  k = 0;
  const auto clamped = perturb_box(b, NoiseConfig{0.3, 0, true}, inward);
  EXPECT_FALSE(unclamped.contains(b));
  EXPECT_TRUE(clamped.contains(b));
  for (int a = 0; a < 3; ++a) EXPECT_LE(unclamped.c_min[a], unclamped.c_max[a]);
}

TEST(PerturbBox, SameSeedSameOutput) {
  const InstanceBox b{1, 0, Point3(0, 0, 0), Point3(1, 2, 1)};
  Rng r1(7), r2(7);
  EXPECT_EQ(perturb_box(b, NoiseConfig{0.3, 7, true}, r1), perturb_box(b, NoiseConfig{0.3, 7, true}, r2));
}

TEST(PerturbBox, VolumeGrowsWithLambdaWithoutDraws) {
  const InstanceBox b{1, 0, Point3(0, 0, 0), Point3(1, 2, 0.5f)};
  double prev = b.volume();
  for (double l = 0.05; l <= 1.0; l += 0.05) {
    const double v = perturb_box(b, NoiseConfig{l, 0, false}, zero_normals).volume();
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(PerturbSceneBoxes, ZeroLambdaGivesTightBoxes) {
  const auto s = two_instance_scene();
  const auto boxes = perturb_scene_boxes(s, NoiseConfig{0.0, 1, true});
  ASSERT_EQ(boxes.size(), 2u);
  EXPECT_EQ(boxes[0], tight_box(s, 0));
  EXPECT_EQ(boxes[1], tight_box(s, 5));
}

TEST(PerturbSceneBoxes, ClampedBoxesContainEveryInstancePoint) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<float> u(-2, 2);
  Scene s;
  for (int i = 0; i < 300; ++i) {
    s.points.emplace_back(u(gen), u(gen), u(gen));
    s.gt_labels.push_back(i % 4 == 3 ? kBackground : i % 4);
  }
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto boxes = perturb_scene_boxes(s, NoiseConfig{0.3, seed, true});
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      if (s.gt_labels[i] == kBackground) continue;
      EXPECT_TRUE(boxes[static_cast<std::size_t>(s.gt_labels[i])].contains(s.points[i]));
    }
  }
}

TEST(PerturbSceneBoxes, SubstreamIsSeedXorInstance) {
  const auto s = two_instance_scene();
  const NoiseConfig cfg{0.3, 1234, true};
  const auto boxes = perturb_scene_boxes(s, cfg);
  Rng rng(1234 ^ 5);
  EXPECT_EQ(boxes[1], perturb_box(tight_box(s, 5), cfg, rng));
}

TEST(PerturbSceneBoxes, DistinctSeedsGiveDistinctBoxes) {
  const auto s = two_instance_scene();
  std::set<std::vector<float>> seen;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto boxes = perturb_scene_boxes(s, NoiseConfig{0.2, seed, false});
    std::vector<float> key;
    for (const auto& b : boxes) {
      for (int a = 0; a < 3; ++a) {
        key.push_back(b.c_min[a]);
        key.push_back(b.c_max[a]);
      }
    }
    EXPECT_TRUE(seen.insert(key).second) << "collision at seed " << seed;
  }
}

TEST(PerturbSceneBoxes, DeterministicAcrossCalls) {
  const auto s = two_instance_scene();
  EXPECT_EQ(perturb_scene_boxes(s, NoiseConfig{0.3, 9, true}), perturb_scene_boxes(s, NoiseConfig{0.3, 9, true}));
}

TEST(PerturbSceneBoxes, RejectsLambdaOutsideUnitInterval) {
  EXPECT_THROW(perturb_scene_boxes(two_instance_scene(), NoiseConfig{1.5, 0, true}), PreconditionError);
  EXPECT_THROW(perturb_scene_boxes(two_instance_scene(), NoiseConfig{-0.1, 0, true}), PreconditionError);
}
