#include "ego/motion.hpp"

namespace ego {

AngleLimits default_angle_limits(const Skeleton& skel) {
  AngleLimits lim;
  auto set = [&](const char* joint, double angle) {
    lim.max_angle[static_cast<std::size_t>(skel.index_of(joint))] = angle;
  };
  set("Head", 0.40);
  set("LeftArm", 0.15);
  set("RightArm", 0.15);
  set("LeftElbow", 1.30);   // upper-arm swing at the shoulder
  set("RightElbow", 1.30);
  set("LeftHand", 1.20);    // forearm swing at the elbow
  set("RightHand", 1.20);
  set("LeftLeg", 0.12);
  set("RightLeg", 0.12);
  set("LeftKnee", 1.00);
  set("RightKnee", 1.00);
  set("LeftFoot", 1.10);
  set("RightFoot", 1.10);
  set("LeftToe", 0.50);
  set("RightToe", 0.50);
  return lim;
}

LocalRotations sample_pose(const Skeleton& skel, const AngleLimits& limits,
                           std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "sample-pose");
  LocalRotations rot = LocalRotations::identity();
  for (int j = 0; j < kNumJoints; ++j) {
    if (skel.parent[static_cast<std::size_t>(j)] < 0) continue;
    const double limit = limits.max_angle[static_cast<std::size_t>(j)];
    // consume the stream uniformly so one joint's limit never shifts others
    Vec3 dir(rng.gaussian(), rng.gaussian(), rng.gaussian());
    const double angle = rng.uniform(0.0, std::max(0.0, limit));
    if (limit <= 0.0) continue;
    const Vec3 bone = skel.rest_offset[static_cast<std::size_t>(j)].normalized();
    Vec3 axis = bone.cross(dir);
    if (axis.norm() < 1e-9) axis = bone.cross(Vec3(1, 0, 0));
    if (axis.norm() < 1e-9) axis = bone.cross(Vec3(0, 1, 0));
    rot.q[static_cast<std::size_t>(j)] = axis_angle(axis.normalized(), angle);
  }
  return rot;
}

MotionClip interpolate_clip(const std::vector<LocalRotations>& keyframes,
                            const std::vector<Vec3>& key_roots, int steps_between,
                            double fps, ActionLabel action) {
  if (keyframes.size() < 2) throw ConfigError("interpolate_clip needs at least 2 keyframes");
  if (keyframes.size() != key_roots.size())
    throw ConfigError("interpolate_clip keyframe/root count mismatch");
  if (steps_between < 0) throw ConfigError("steps_between must be non-negative");
  MotionClip clip;
  clip.fps = fps;
  clip.action = action;
  const int seg = steps_between + 1;
  for (std::size_t k = 0; k + 1 < keyframes.size(); ++k) {
    for (int s = 0; s < seg; ++s) {
      const double t = static_cast<double>(s) / seg;
      LocalRotations r;
      for (int j = 0; j < kNumJoints; ++j)
        r.q[static_cast<std::size_t>(j)] =
            s == 0 ? keyframes[k].q[static_cast<std::size_t>(j)]
                   : slerp(keyframes[k].q[static_cast<std::size_t>(j)],
                           keyframes[k + 1].q[static_cast<std::size_t>(j)], t);
      clip.rotations.push_back(r);
      clip.root_positions.push_back((1.0 - t) * key_roots[k] + t * key_roots[k + 1]);
    }
  }
  clip.rotations.push_back(keyframes.back());
  clip.root_positions.push_back(key_roots.back());
  return clip;
}

}  // namespace ego
