#include <fstream>

#include <gtest/gtest.h>

#include "boxrefine/bundle_io.hpp"
#include "boxrefine/scene.hpp"
#include "boxrefine/synth.hpp"
#include "test_util.hpp"

using namespace boxrefine;
using testing_util::axis_view;
using testing_util::fresh_dir;

namespace {

Scene small_valid_scene() {
  Scene s;
  s.points = {Point3(0, 0, 1), Point3(1, 0, 1), Point3(0, 1, 1), Point3(1, 1, 2)};
  s.normals = {Point3(0, 0, 1), Point3(0, 0, 1), Point3(0, 0, 1), Point3(1, 0, 0)};
  s.colors = {Point3(0.1f, 0.2f, 0.3f), Point3(1, 1, 1), Point3(0, 0, 0), Point3(0.5f, 0.5f, 0.5f)};
  s.gt_labels = {0, 0, kBackground, 1};
  s.boxes = {{0, 1, Point3(0, 0, 1), Point3(1, 0, 1)}, {1, 2, Point3(1, 1, 2), Point3(1, 1, 2)}};
  s.superpoints = SuperpointPartition{{0, 0, 1, 2}, 3};
  auto v = axis_view(0, 8, 6, 10, 4, 3);
  for (std::size_t i = 0; i < v.depth.size(); ++i) v.depth[i] = quantize_depth(1.0 + 0.01 * static_cast<double>(i), 1.0);
  s.views.push_back(v);
  return s;
}

bool mentions(const ValidationReport& r, const std::string& needle) {
  for (const auto& line : r) {
    if (line.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST(ValidateScene, WellFormedSceneHasEmptyReport) {
  EXPECT_TRUE(validate_scene(small_valid_scene()).empty());
}

TEST(ValidateScene, FlagsEachBrokenInvariant) {
  {
    auto s = small_valid_scene();
    s.normals.pop_back();
    EXPECT_TRUE(mentions(validate_scene(s), "normals: length"));
  }
  {
    auto s = small_valid_scene();
    s.normals[1] = Point3(0, 0, 2);
    EXPECT_TRUE(mentions(validate_scene(s), "not unit length"));
  }
  {
    auto s = small_valid_scene();
    s.colors[0] = Point3(1.5f, 0, 0);
    EXPECT_TRUE(mentions(validate_scene(s), "outside [0,1]"));
  }
  {
    auto s = small_valid_scene();
    s.boxes[0].c_min.x() = 2.0f;
    EXPECT_TRUE(mentions(validate_scene(s), "c_min.x > c_max.x"));
  }
  {
    auto s = small_valid_scene();
    s.boxes[1].instance_id = 9;
    EXPECT_TRUE(mentions(validate_scene(s), "absent from gt_labels"));
  }
  {
    auto s = small_valid_scene();
    s.superpoints->superpoint_count = 4;
    EXPECT_TRUE(mentions(validate_scene(s), "superpoint 3 is empty"));
  }
  {
    auto s = small_valid_scene();
    s.superpoints->assignment[0] = 7;
    EXPECT_TRUE(mentions(validate_scene(s), "out of range"));
  }
  {
    auto s = small_valid_scene();
    s.views[0].K(1, 0) = 0.5;
    EXPECT_TRUE(mentions(validate_scene(s), "upper-triangular"));
  }
  {
    auto s = small_valid_scene();
    s.views[0].depth[3] = -1.0f;
    EXPECT_TRUE(mentions(validate_scene(s), "negative or NaN depth"));
  }
  {
    auto s = small_valid_scene();
    s.points[2].y() = std::numeric_limits<float>::quiet_NaN();
    EXPECT_TRUE(mentions(validate_scene(s), "non-finite"));
  }
}

TEST(Bundle, RoundTripPreservesEveryField) {
  const auto dir = fresh_dir("roundtrip");
  auto s = small_valid_scene();
  s.views[0].rgb.assign(3 * s.views[0].pixel_count(), 0);
  for (std::size_t i = 0; i < s.views[0].rgb.size(); ++i) s.views[0].rgb[i] = static_cast<std::uint8_t>(i * 7);
  save_scene_bundle(s, dir);
  const Scene back = load_scene_bundle(dir);
  EXPECT_EQ(back, s);
}

TEST(Bundle, GeneratedSceneSurvivesSaveLoad) {
  SynthConfig cfg;
  cfg.seed = 11;
  cfg.object_count = 2;
  cfg.view_count = 2;
  cfg.points_per_m2 = 300;
  cfg.patch_size = 0.3;
  const Scene s = generate_scene(cfg);
  const auto dir = fresh_dir("generated");
  save_scene_bundle(s, dir);
  EXPECT_EQ(load_scene_bundle(dir), s);
}

TEST(Bundle, OptionalArraysStayAbsent) {
  const auto dir = fresh_dir("optional");
  Scene s;
  s.points = {Point3(0, 0, 1)};
  save_scene_bundle(s, dir);
  const Scene back = load_scene_bundle(dir);
  EXPECT_TRUE(back.normals.empty());
  EXPECT_FALSE(back.has_gt());
  EXPECT_FALSE(back.superpoints.has_value());
  EXPECT_FALSE(std::filesystem::exists(dir / "gt.i32"));
}

TEST(Bundle, MissingManifestIsFormatError) {
  EXPECT_THROW(load_scene_bundle(fresh_dir("empty")), FormatError);
}

TEST(Bundle, LengthMismatchIsValidationError) {
  const auto dir = fresh_dir("mismatch");
  save_scene_bundle(small_valid_scene(), dir);
  write_i32_array(dir / "gt.i32", {0, 0, 1});
  EXPECT_THROW(load_scene_bundle(dir), ValidationError);
}

TEST(Bundle, TruncatedBlobIsFormatError) {
  const auto dir = fresh_dir("truncated");
  save_scene_bundle(small_valid_scene(), dir);
  std::ofstream(dir / "points.f32", std::ios::binary) << "abcdef";
  EXPECT_THROW(load_scene_bundle(dir), FormatError);
}

TEST(Bundle, InvalidContentIsRejectedAtLoad) {
  const auto dir = fresh_dir("invalid");
  auto s = small_valid_scene();
  s.boxes[0].c_min.z() = 5.0f;
  save_scene_bundle(s, dir);
  EXPECT_THROW(load_scene_bundle(dir), ValidationError);
}

TEST(Bundle, DepthPgmIsBigEndianSixteenBit) {
  const auto dir = fresh_dir("pgm");
  write_pgm16(dir / "d.pgm", {0x1234, 0, 65535}, 3, 1);
  std::ifstream in(dir / "d.pgm", std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ASSERT_GE(bytes.size(), 6u);
  const std::string tail = bytes.substr(bytes.size() - 6);
  EXPECT_EQ(static_cast<unsigned char>(tail[0]), 0x12);
  EXPECT_EQ(static_cast<unsigned char>(tail[1]), 0x34);
  int w = 0, h = 0;
  EXPECT_EQ(read_pgm16(dir / "d.pgm", w, h), (std::vector<std::uint16_t>{0x1234, 0, 65535}));
  EXPECT_EQ(w, 3);
  EXPECT_EQ(h, 1);
}

TEST(Bundle, DepthScaleConvertsUnitsToMetres) {
  const auto dir = fresh_dir("scale");
  Scene s;
  s.points = {Point3(0, 0, 1)};
  auto v = axis_view(0, 2, 1, 10, 1, 0.5);
  v.depth_scale_mm_per_unit = 0.25;
  v.depth = {quantize_depth(1.0, 0.25), 0.0f};
  s.views.push_back(v);
  save_scene_bundle(s, dir);
  int w = 0, h = 0;
  const auto raw = read_pgm16(dir / "view_000.pgm", w, h);
  EXPECT_EQ(raw[0], 4000);
  EXPECT_EQ(raw[1], 0);
  EXPECT_FLOAT_EQ(load_scene_bundle(dir).views[0].depth[0], 1.0f);
}

TEST(Bundle, BoxesJsonRoundTrip) {
  const auto dir = fresh_dir("boxes");
  const std::vector<InstanceBox> boxes = {{3, 1, Point3(-1, 0, 0.5f), Point3(1, 2, 3)}, {7, 2, Point3(0, 0, 0), Point3(0, 0, 0)}};
  save_boxes_json(dir / "b.json", boxes);
  EXPECT_EQ(load_boxes_json(dir / "b.json"), boxes);
}

TEST(LabelMap, HoldsOneLabelPerPoint) {
  LabelMap m{{0, kBackground, 2}};
  EXPECT_EQ(m.size(), 3u);
  EXPECT_EQ(m[1], kBackground);
}

TEST(InstanceBox, ClosedContainmentAndVolume) {
  const InstanceBox b{0, 0, Point3(0, 0, 0), Point3(1, 2, 3)};
  EXPECT_TRUE(b.contains(Point3(1, 2, 3)));
  EXPECT_TRUE(b.contains(Point3(0, 0, 0)));
  EXPECT_FALSE(b.contains(Point3(1.001f, 0, 0)));
  EXPECT_DOUBLE_EQ(b.volume(), 6.0);
}
