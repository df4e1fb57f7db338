#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Geometry>
#include <filesystem>

#include "ego/kinematics.hpp"
#include "ego/rng.hpp"

using namespace ego;

namespace {

// Random zero-twist local rotations: per-bone swing about an axis
// perpendicular to the rest direction, root kept at identity.
LocalRotations random_swing(const Skeleton& skel, Rng& rng, double max_angle) {
  LocalRotations rot = LocalRotations::identity();
  for (int j = 0; j < kNumJoints; ++j) {
    if (skel.parent[static_cast<std::size_t>(j)] < 0) continue;
    const Vec3 bone = skel.rest_offset[static_cast<std::size_t>(j)].normalized();
    Vec3 seedv(rng.gaussian(), rng.gaussian(), rng.gaussian());
    Vec3 axis = bone.cross(seedv);
    if (axis.norm() < 1e-8) axis = bone.cross(Vec3(1, 0, 0));
    const double angle = rng.uniform(0.0, max_angle);
    rot.q[static_cast<std::size_t>(j)] = axis_angle(axis.normalized(), angle);
  }
  return rot;
}

// Independent FK oracle: 3x3 rotation matrices accumulated joint by joint.
Pose3D fk_matrix_oracle(const LocalRotations& rot, const Skeleton& skel, const Vec3& root) {
  std::array<Eigen::Matrix3d, kNumJoints> global;
  Pose3D pose;
  for (int j : skel.topo_order) {
    const int p = skel.parent[static_cast<std::size_t>(j)];
    if (p < 0) {
      global[static_cast<std::size_t>(j)] = rot.q[static_cast<std::size_t>(j)].toRotationMatrix();
      pose.row(j) = root.transpose();
      continue;
    }
    global[static_cast<std::size_t>(j)] =
        global[static_cast<std::size_t>(p)] * rot.q[static_cast<std::size_t>(j)].toRotationMatrix();
    pose.row(j) = pose.row(p) + (global[static_cast<std::size_t>(j)] *
                                 skel.rest_offset[static_cast<std::size_t>(j)])
                                    .transpose();
  }
  return pose;
}

}  // namespace

TEST_CASE("quaternion algebra") {
  SUBCASE("identity times q is q") {
    Quat q = axis_angle(Vec3(0, 0, 1), 0.7);
    Quat r = quat_mul(Quat::Identity(), q);
    CHECK(r.angularDistance(q) < 1e-12);
  }
  SUBCASE("two 90-degree z rotations compose to 180 degrees") {
    Quat q = axis_angle(Vec3(0, 0, 1), M_PI / 2);
    Quat r = quat_mul(q, q);
    CHECK(std::abs(r.w()) < 1e-12);
    CHECK(std::abs(r.x()) < 1e-12);
    CHECK(std::abs(r.y()) < 1e-12);
    CHECK(r.z() == doctest::Approx(1.0));
  }
  SUBCASE("q times conjugate is identity") {
    Rng rng = Rng::stream(1, "quat");
    for (int i = 0; i < 50; ++i) {
      Quat q(rng.gaussian(), rng.gaussian(), rng.gaussian(), rng.gaussian());
      q.normalize();
      Quat r = quat_mul(q, q.conjugate());
      CHECK(r.angularDistance(Quat::Identity()) < 1e-6);
    }
  }
  SUBCASE("canonical form enforces w >= 0 and unit norm") {
    Rng rng = Rng::stream(2, "canon");
    for (int i = 0; i < 100; ++i) {
      Quat q(rng.gaussian(), rng.gaussian(), rng.gaussian(), rng.gaussian());
      Quat c = canonical(q);
      CHECK(is_canonical_unit(c));
      // q and -q canonicalize identically
      Quat c2 = canonical(Quat(-q.w(), -q.x(), -q.y(), -q.z()));
      CHECK(c.coeffs().isApprox(c2.coeffs(), 1e-12));
    }
  }
}

TEST_CASE("quat_from_two_vectors") {
  SUBCASE("equal directions give identity") {
    Quat q = quat_from_two_vectors(Vec3(1, 2, 3), Vec3(2, 4, 6));
    CHECK(q.angularDistance(Quat::Identity()) < 1e-12);
  }
  SUBCASE("x-axis to y-axis is a 90-degree z rotation") {
    Quat q = quat_from_two_vectors(Vec3(1, 0, 0), Vec3(0, 1, 0));
    const double s = std::sqrt(2.0) / 2.0;
    CHECK(q.w() == doctest::Approx(s));
    CHECK(q.x() == doctest::Approx(0.0));
    CHECK(q.y() == doctest::Approx(0.0));
    CHECK(q.z() == doctest::Approx(s));
  }
  SUBCASE("anti-parallel x picks the z axis and still maps u to v") {
    Quat q = quat_from_two_vectors(Vec3(1, 0, 0), Vec3(-1, 0, 0));
    CHECK(std::abs(q.w()) < 1e-12);
    CHECK(std::abs(q.z()) == doctest::Approx(1.0));
    const Vec3 mapped = q * Vec3(1, 0, 0);
    CHECK((mapped - Vec3(-1, 0, 0)).norm() < 1e-6);
  }
  SUBCASE("zero input is an error") {
    CHECK_THROWS_AS(quat_from_two_vectors(Vec3::Zero(), Vec3(1, 0, 0)), NumericError);
  }
  SUBCASE("random pairs: rotation maps u-hat to v-hat") {
    Rng rng = Rng::stream(3, "qftv");
    for (int i = 0; i < 200; ++i) {
      Vec3 u(rng.gaussian(), rng.gaussian(), rng.gaussian());
      Vec3 v(rng.gaussian(), rng.gaussian(), rng.gaussian());
      if (u.norm() < 1e-6 || v.norm() < 1e-6) continue;
      Quat q = quat_from_two_vectors(u, v);
      CHECK(((q * u.normalized()) - v.normalized()).norm() < 1e-9);
      CHECK(is_canonical_unit(q));
    }
  }
}

TEST_CASE("slerp") {
  Quat a = Quat::Identity();
  Quat b = axis_angle(Vec3(0, 0, 1), M_PI / 2);
  Quat mid = slerp(a, b, 0.5);
  CHECK(quat_angle(mid) == doctest::Approx(M_PI / 4).epsilon(1e-9));
  CHECK(slerp(a, b, 0.0).angularDistance(a) < 1e-12);
  CHECK(slerp(a, b, 1.0).angularDistance(b) < 1e-12);
}

TEST_CASE("default skeleton is valid") {
  Skeleton s = default_skeleton();
  s.validate();
  CHECK(s.joint_names[static_cast<std::size_t>(s.root)] == "Neck");
  CHECK(s.heatmap_channel(s.index_of("Head")) == -1);
  CHECK(s.heatmap_channel(s.index_of("Neck")) == 0);
  int covered = 0;
  for (int j = 0; j < kNumJoints; ++j)
    if (s.heatmap_channel(j) >= 0) ++covered;
  CHECK(covered == kNumHeatmapJoints);
}

TEST_CASE("skeleton file round trip") {
  namespace fs = std::filesystem;
  Skeleton s = default_skeleton();
  const fs::path dir = fs::temp_directory_path() / "egopose_skel_test";
  fs::create_directories(dir);
  const std::string path = (dir / "skel.json").string();
  save_skeleton(path, s);
  Skeleton r = load_skeleton(path);
  for (int j = 0; j < kNumJoints; ++j) {
    CHECK(r.joint_names[static_cast<std::size_t>(j)] == s.joint_names[static_cast<std::size_t>(j)]);
    CHECK(r.parent[static_cast<std::size_t>(j)] == s.parent[static_cast<std::size_t>(j)]);
    CHECK((r.rest_offset[static_cast<std::size_t>(j)] - s.rest_offset[static_cast<std::size_t>(j)])
              .norm() < 1e-15);
  }
}

TEST_CASE("forward kinematics") {
  Skeleton skel = default_skeleton();
  SUBCASE("identity rotations give the rest pose") {
    Pose3D pose = forward_kinematics(LocalRotations::identity(), skel, Vec3::Zero());
    for (int j : skel.topo_order) {
      const int p = skel.parent[static_cast<std::size_t>(j)];
      if (p < 0) continue;
      Vec3 expect = (pose.row(p).transpose() + skel.rest_offset[static_cast<std::size_t>(j)]);
      CHECK((pose.row(j).transpose() - expect).norm() < 1e-12);
    }
  }
  SUBCASE("90-degree elbow rotation matches the matrix-chain oracle") {
    LocalRotations rot = LocalRotations::identity();
    const int elbow = skel.index_of("LeftElbow");
    rot.q[static_cast<std::size_t>(elbow)] = axis_angle(Vec3(0, 1, 0), M_PI / 2);
    Pose3D ours = forward_kinematics(rot, skel, Vec3(0.1, -0.05, 0.2));
    Pose3D oracle = fk_matrix_oracle(rot, skel, Vec3(0.1, -0.05, 0.2));
    const int hand = skel.index_of("LeftHand");
    CHECK((ours.row(hand) - oracle.row(hand)).norm() < 1e-9);
    CHECK((ours - oracle).cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("translation equivariance in the root position") {
    Rng rng = Rng::stream(4, "fk");
    LocalRotations rot = random_swing(skel, rng, 1.2);
    const Vec3 t(0.3, -0.2, 0.5);
    Pose3D a = forward_kinematics(rot, skel, Vec3::Zero());
    Pose3D b = forward_kinematics(rot, skel, t);
    for (int j = 0; j < kNumJoints; ++j)
      CHECK((b.row(j) - a.row(j) - t.transpose()).norm() < 1e-12);
  }
  SUBCASE("matches the matrix-chain oracle on random poses") {
    Rng rng = Rng::stream(5, "fk2");
    for (int i = 0; i < 50; ++i) {
      LocalRotations rot = random_swing(skel, rng, 1.5);
      Pose3D ours = forward_kinematics(rot, skel, Vec3::Zero());
      Pose3D oracle = fk_matrix_oracle(rot, skel, Vec3::Zero());
      CHECK((ours - oracle).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("extract_rotations") {
  Skeleton skel = default_skeleton();
  SUBCASE("rest pose gives all identities") {
    Pose3D rest = forward_kinematics(LocalRotations::identity(), skel, Vec3::Zero());
    LocalRotations rot = extract_rotations(rest, skel);
    for (int j = 0; j < kNumJoints; ++j)
      CHECK(rot.q[static_cast<std::size_t>(j)].angularDistance(Quat::Identity()) < 1e-9);
  }
  SUBCASE("round trip FK(r(P)) = P and r(FK(R)) = R") {
    Rng rng = Rng::stream(6, "roundtrip");
    for (int i = 0; i < 200; ++i) {
      LocalRotations rot = random_swing(skel, rng, 1.8);
      Pose3D pose = forward_kinematics(rot, skel, Vec3(0, -0.05, 0.18));
      LocalRotations rec = extract_rotations(pose, skel);
      for (int j = 0; j < kNumJoints; ++j) {
        CHECK(rec.q[static_cast<std::size_t>(j)]
                  .angularDistance(rot.q[static_cast<std::size_t>(j)]) < 1e-6);
        CHECK(is_canonical_unit(rec.q[static_cast<std::size_t>(j)]));
      }
      Pose3D again = forward_kinematics(rec, skel, pose.row(skel.root).transpose());
      CHECK((again - pose).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
  SUBCASE("anti-parallel bone still satisfies FK consistency") {
    LocalRotations rot = LocalRotations::identity();
    const int knee = skel.index_of("LeftKnee");
    // rotate the thigh nearly opposite to its rest direction
    const Vec3 rest = skel.rest_offset[static_cast<std::size_t>(knee)].normalized();
    Vec3 axis = rest.cross(Vec3(0, 1, 0)).normalized();
    rot.q[static_cast<std::size_t>(knee)] = axis_angle(axis, M_PI);
    Pose3D pose = forward_kinematics(rot, skel, Vec3::Zero());
    LocalRotations rec = extract_rotations(pose, skel);
    Pose3D again = forward_kinematics(rec, skel, Vec3::Zero());
    CHECK((again - pose).cwiseAbs().maxCoeff() < 1e-6);
  }
  SUBCASE("zero-length bone raises an error naming the joint") {
    Pose3D pose = forward_kinematics(LocalRotations::identity(), skel, Vec3::Zero());
    pose.row(skel.index_of("LeftHand")) = pose.row(skel.index_of("LeftElbow"));
    try {
      extract_rotations(pose, skel);
      CHECK(false);
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("LeftHand") != std::string::npos);
    }
  }
}

TEST_CASE("limb_vectors") {
  Skeleton skel = default_skeleton();
  SUBCASE("rest pose limbs equal rest offsets") {
    Pose3D rest = forward_kinematics(LocalRotations::identity(), skel, Vec3::Zero());
    auto limbs = limb_vectors(rest, skel);
    int idx = 0;
    for (int j = 0; j < kNumJoints; ++j) {
      if (skel.parent[static_cast<std::size_t>(j)] < 0) continue;
      CHECK((limbs[static_cast<std::size_t>(idx)] -
             skel.rest_offset[static_cast<std::size_t>(j)]).norm() < 1e-12);
      ++idx;
    }
  }
  SUBCASE("translation invariance") {
    Rng rng = Rng::stream(7, "limbs");
    LocalRotations rot = random_swing(skel, rng, 1.0);
    Pose3D a = forward_kinematics(rot, skel, Vec3::Zero());
    Pose3D b = a;
    b.rowwise() += Eigen::RowVector3d(1.0, 2.0, 3.0);
    auto la = limb_vectors(a, skel);
    auto lb = limb_vectors(b, skel);
    for (int i = 0; i < kNumBones; ++i)
      CHECK((la[static_cast<std::size_t>(i)] - lb[static_cast<std::size_t>(i)]).norm() < 1e-12);
  }
  SUBCASE("rigid bones: FK limb lengths equal rest lengths") {
    Rng rng = Rng::stream(8, "rigid");
    for (int i = 0; i < 50; ++i) {
      LocalRotations rot = random_swing(skel, rng, 2.0);
      Pose3D pose = forward_kinematics(rot, skel, Vec3::Zero());
      auto limbs = limb_vectors(pose, skel);
      int idx = 0;
      for (int j = 0; j < kNumJoints; ++j) {
        if (skel.parent[static_cast<std::size_t>(j)] < 0) continue;
        CHECK(limbs[static_cast<std::size_t>(idx)].norm() ==
              doctest::Approx(skel.rest_offset[static_cast<std::size_t>(j)].norm())
                  .epsilon(1e-9));
        ++idx;
      }
    }
  }
}
