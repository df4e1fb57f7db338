#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <string>
#include <vector>

#include "ego/common.hpp"

namespace ego {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

// 16 joint positions in meters, camera reference frame, one row per joint.
using Pose3D = Eigen::Matrix<double, kNumJoints, 3>;

// Per-joint rotation relative to the parent frame. The quaternion stored at
// joint j rotates j's own rest offset, so the 15 non-root entries are in
// one-to-one correspondence with the bones; the root entry orients the whole
// body (identity by default).
struct LocalRotations {
  std::array<Quat, kNumJoints> q;
  static LocalRotations identity();
};

// ---------------------------------------------------------------------------
// Quaternion algebra. Quaternions are kept unit-norm; the canonical form has
// w >= 0 (and, at w == 0, the first nonzero vector component positive).
// ---------------------------------------------------------------------------

Quat canonical(const Quat& q);
bool is_canonical_unit(const Quat& q, double tol = 1e-6);

// Hamilton product, renormalized and canonicalized.
Quat quat_mul(const Quat& a, const Quat& b);

// Minimal rotation taking u to v (directions; inputs need not be unit).
// Anti-parallel inputs rotate 180 degrees about a deterministic perpendicular
// axis chosen by the smallest-component rule. Zero-length input is an error.
Quat quat_from_two_vectors(const Vec3& u, const Vec3& v);

// Geodesic angle from the identity rotation, in [0, pi].
double quat_angle(const Quat& q);

// Shortest-path spherical interpolation; endpoints reproduced exactly.
Quat slerp(const Quat& a, const Quat& b, double t);

Quat axis_angle(const Vec3& axis, double angle);

// ---------------------------------------------------------------------------
// Skeleton
// ---------------------------------------------------------------------------

struct Skeleton {
  std::array<std::string, kNumJoints> joint_names;
  std::array<int, kNumJoints> parent;    // -1 for the root
  std::array<Vec3, kNumJoints> rest_offset;  // from parent, in parent frame
  std::array<int, kNumHeatmapJoints> heatmap_joints;
  int root = 0;
  std::vector<int> topo_order;  // parents before children

  int index_of(const std::string& name) const;
  // heatmap channel index of a joint, or -1 when it has none (the head).
  int heatmap_channel(int joint) const;
  void validate() const;  // tree shape, offsets, heatmap set
};

// Neck-rooted 16-joint default: Head, both arm chains, both leg chains,
// symmetric A-pose, total height about 1.7 m, camera frame with +Z pointing
// down the body and the head just behind/above the camera.
Skeleton default_skeleton();

Skeleton load_skeleton(const std::string& path);
void save_skeleton(const std::string& path, const Skeleton& skel);
// JSON form used by both the skeleton file and checkpoint metadata.
std::string skeleton_to_json(const Skeleton& skel);
Skeleton skeleton_from_json(const std::string& text);

// ---------------------------------------------------------------------------
// Kinematics
// ---------------------------------------------------------------------------

// position[j] = position[parent] + global_rot[j] * rest_offset[j], with
// global_rot accumulated down the tree (global_rot[j] = global_rot[parent] *
// rot[j]); the root sits at root_pos.
Pose3D forward_kinematics(const LocalRotations& rot, const Skeleton& skel,
                          const Vec3& root_pos);

// r(P): per-bone swing aligning each rest direction (in the parent frame) to
// the observed bone direction; twist about the bone axis is zero, the root
// rotation is identity. forward_kinematics(extract_rotations(P)) reproduces
// P for any pose reachable by FK. Zero-length bones are an error naming the
// joint.
LocalRotations extract_rotations(const Pose3D& pose, const Skeleton& skel);

// Vector from parent to joint for every non-root joint, in skeleton index
// order.
std::array<Vec3, kNumBones> limb_vectors(const Pose3D& pose, const Skeleton& skel);

}  // namespace ego
