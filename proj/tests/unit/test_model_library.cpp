#include "ait/model_library.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace ait;

namespace {

json block_doc() {
  return json::parse(R"({
    "schema_version": 1,
    "objects": [{
      "id": "block_075",
      "shape": {"type": "box", "extents": [0.075, 0.075, 0.075]},
      "grasps": [
        {"name": "top", "goal_pose": {"position": [0, 0, 0.0375], "orientation": [0, 1, 0, 0]},
         "approach_dir": [0, 0, 1]},
        {"name": "side", "goal_pose": {"position": [0.0375, 0, 0], "orientation": [0.7071067811865476, 0, -0.7071067811865476, 0]},
         "approach_dir": [1, 0, 0], "launch_distance": 0.15, "cone_half_angle": 0.3}
      ]
    }]
  })");
}

}  // namespace

TEST(Library, EmptyLibraryLoads) {
  const ModelLibrary lib = load_library_string(R"({"schema_version": 1, "objects": []})");
  EXPECT_TRUE(lib.empty());
  EXPECT_THROW(lib.get("anything"), NotFoundError);
}

TEST(Library, BlockRoundTrip) {
  const ModelLibrary lib = library_from_json(block_doc());
  ASSERT_EQ(lib.size(), 1u);
  const ObjectModel& m = lib.get("block_075");
  ASSERT_EQ(m.grasps.size(), 2u);
  EXPECT_EQ(m.grasps[0].launch_distance, EnvelopeDefaults::launch_distance);
  EXPECT_EQ(m.grasps[0].cone_half_angle, EnvelopeDefaults::cone_half_angle);
  EXPECT_EQ(m.grasps[1].launch_distance, 0.15);
  EXPECT_EQ(m.grasps[1].cone_half_angle, 0.3);

  const ModelLibrary again = load_library_string(save_library(lib));
  const ObjectModel& n = again.get("block_075");
  ASSERT_EQ(n.grasps.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(n.grasps[i].name, m.grasps[i].name);
    EXPECT_EQ(n.grasps[i].goal_pose.position, m.grasps[i].goal_pose.position);
    EXPECT_EQ(n.grasps[i].goal_pose.orientation.coeffs(), m.grasps[i].goal_pose.orientation.coeffs());
    EXPECT_EQ(n.grasps[i].approach_dir, m.grasps[i].approach_dir);
    EXPECT_EQ(n.grasps[i].launch_distance, m.grasps[i].launch_distance);
    EXPECT_EQ(n.grasps[i].cone_half_angle, m.grasps[i].cone_half_angle);
  }
}

TEST(Library, SaveIsIdempotent) {
  const std::string once = save_library(library_from_json(block_doc()));
  EXPECT_EQ(save_library(load_library_string(once)), once);
}

TEST(Library, ShippedLibrarySavesByteIdentical) {
  std::ifstream in(test::data_path("library.json"));
  ASSERT_TRUE(in);
  const ModelLibrary lib = load_library(in);
  EXPECT_FALSE(lib.empty());
  const std::string once = save_library(lib);
  EXPECT_EQ(save_library(load_library_string(once)), once);
  for (const auto& o : lib.objects())
    if (o.graspable) EXPECT_FALSE(o.grasps.empty()) << o.id;
}

TEST(Library, RejectsZeroApproach) {
  json doc = block_doc();
  doc["objects"][0]["grasps"][0]["approach_dir"] = {0, 0, 0};
  EXPECT_THROW(library_from_json(doc), ValidationError);
}

TEST(Library, RejectsBadDocuments) {
  EXPECT_THROW(load_library_string("{not json"), ParseError);
  EXPECT_THROW(load_library_string(R"({"schema_version": 2, "objects": []})"), ParseError);
  json dup = block_doc();
  dup["objects"].push_back(dup["objects"][0]);
  EXPECT_THROW(library_from_json(dup), ValidationError);
  json neg = block_doc();
  neg["objects"][0]["shape"]["extents"][1] = -0.1;
  EXPECT_THROW(library_from_json(neg), ValidationError);
  json shape = block_doc();
  shape["objects"][0]["shape"]["type"] = "torus";
  EXPECT_THROW(library_from_json(shape), ParseError);
  json nograsp = block_doc();
  nograsp["objects"][0]["grasps"] = json::array();
  EXPECT_THROW(library_from_json(nograsp), ValidationError);
  json cone = block_doc();
  cone["objects"][0]["grasps"][0]["cone_half_angle"] = 2.0;
  EXPECT_THROW(library_from_json(cone), ValidationError);
}

TEST(GraspsFor, IdentityPoseIsObjectFrame) {
  const ModelLibrary lib = library_from_json(block_doc());
  const auto g = grasps_for(lib, "block_075", Pose::identity());
  const auto& m = lib.get("block_075");
  ASSERT_EQ(g.size(), m.grasps.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_TRUE(g[i].goal_pose.position.isApprox(m.grasps[i].goal_pose.position));
    EXPECT_TRUE(g[i].approach_dir.isApprox(m.grasps[i].approach_dir));
  }
}

TEST(GraspsFor, RotationAboutVertical) {
  const ModelLibrary lib = library_from_json(block_doc());
  const Pose p(Vec3(0.5, 0.1, 0.0375), Quat(Eigen::AngleAxisd(kPi / 2, Vec3::UnitZ())));
  const auto g = grasps_for(lib, "block_075", p);
  // side grasp at +x in the object frame faces +y in the world
  EXPECT_NEAR((g[1].goal_pose.position - Vec3(0.5, 0.1375, 0.0375)).norm(), 0.0, 1e-12);
  EXPECT_NEAR((g[1].approach_dir - Vec3::UnitY()).norm(), 0.0, 1e-12);
  EXPECT_NEAR((g[1].launch_position() - Vec3(0.5, 0.2875, 0.0375)).norm(), 0.0, 1e-12);
  EXPECT_NEAR((g[0].approach_dir - Vec3::UnitZ()).norm(), 0.0, 1e-12);
}

TEST(GraspsFor, RigidMotionPreservesEnvelopeGeometry) {
  const ModelLibrary lib = library_from_json(block_doc());
  std::mt19937_64 rng(11);
  for (int i = 0; i < 100; ++i) {
    const Pose a = test::random_pose(rng), b = test::random_pose(rng);
    const auto ga = grasps_for(lib, "block_075", a), gb = grasps_for(lib, "block_075", b);
    for (std::size_t k = 0; k < ga.size(); ++k) {
      EXPECT_NEAR(ga[k].approach_dir.norm(), 1.0, 1e-12);
      EXPECT_NEAR((ga[k].goal_pose.position - a.position).norm(), (gb[k].goal_pose.position - b.position).norm(), 1e-12);
      EXPECT_NEAR((ga[k].launch_position() - ga[k].goal_pose.position).norm(), ga[k].launch_distance, 1e-12);
      // composing frames equals transforming twice
      const auto twice = ga[k].transformed(b);
      const auto once = lib.get("block_075").grasps[k].transformed(compose(b, a));
      EXPECT_LE(test::pose_distance(twice.goal_pose, once.goal_pose), 1e-9);
      EXPECT_LE((twice.approach_dir - once.approach_dir).norm(), 1e-9);
    }
  }
  EXPECT_THROW(grasps_for(lib, "missing", Pose::identity()), NotFoundError);
}
