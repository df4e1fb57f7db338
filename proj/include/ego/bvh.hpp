#pragma once

#include <string>
#include <vector>

#include "ego/kinematics.hpp"
#include "ego/motion.hpp"

namespace ego {

// Z-X-Y Euler angles in radians: R = Rz(z) * Rx(x) * Ry(y).
Vec3 quat_to_euler_zxy(const Quat& q);
Quat euler_zxy_to_quat(const Vec3& zxy);

// Hierarchical motion-capture text export. Every bone becomes a zero-offset
// rotation node followed by an offset node, so the per-bone rotations of this
// skeleton convention map onto the format's parent-chain semantics exactly.
// Angles are written in degrees, channel order Zrotation Xrotation Yrotation.
void write_bvh(const std::string& path, const Skeleton& skel,
               const std::vector<LocalRotations>& rotations,
               const std::vector<Vec3>& root_positions, double fps);

struct BvhClip {
  std::vector<LocalRotations> rotations;
  std::vector<Vec3> root_positions;
  double fps = 30.0;
};

// Reads files produced by write_bvh (fixed channel layout).
BvhClip read_bvh(const std::string& path, const Skeleton& skel);

// Structured-text (JSON) motion file with exact quaternions.
void write_motion_json(const std::string& path, const Skeleton& skel,
                       const std::vector<LocalRotations>& rotations,
                       const std::vector<Vec3>& root_positions, double fps);
BvhClip read_motion_json(const std::string& path);

}  // namespace ego
