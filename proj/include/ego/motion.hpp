#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ego/dataset.hpp"
#include "ego/kinematics.hpp"
#include "ego/rng.hpp"

namespace ego {

// Maximum swing angle per joint's bone, radians; the root entry is ignored.
struct AngleLimits {
  std::array<double, kNumJoints> max_angle{};
};

// Plausible default ranges: wide elbows/knees, stiff clavicles and hips.
AngleLimits default_angle_limits(const Skeleton& skel);

// Independent per-joint random swing within the limits, zero twist about each
// bone axis, root left at identity. Deterministic per seed.
LocalRotations sample_pose(const Skeleton& skel, const AngleLimits& limits,
                           std::uint64_t seed);

struct MotionClip {
  std::vector<LocalRotations> rotations;
  std::vector<Vec3> root_positions;
  double fps = 30.0;
  ActionLabel action = ActionLabel::kGaming;
};

// Spherical interpolation per joint between consecutive keyframes with
// steps_between in-between frames; keyframes are reproduced exactly and the
// clip has (K-1)*(steps_between+1)+1 frames.
MotionClip interpolate_clip(const std::vector<LocalRotations>& keyframes,
                            const std::vector<Vec3>& key_roots, int steps_between,
                            double fps, ActionLabel action);

}  // namespace ego
