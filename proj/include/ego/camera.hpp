#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <utility>

#include "ego/kinematics.hpp"

namespace ego {

using Vec2 = Eigen::Vector2d;

// Equidistant fisheye: pixel radius = focal * angle off the optical axis.
// The optical axis is +Z, pointing down toward the body; the mount transform
// maps headset-rig coordinates into this camera frame.
struct FisheyeCamera {
  double focal = 115.0;          // pixels per radian
  Vec2 principal_point{184.0, 184.0};
  int width = 368;
  int height = 368;
  double fov = 3.14159265358979323846;  // radians
  Quat mount_rotation = Quat::Identity();     // rig -> camera
  Vec3 mount_translation = Vec3::Zero();

  void validate() const;
};

struct Projection {
  Vec2 pixel;
  bool visible;  // theta <= fov/2 and pixel inside the image
};

// Projects a camera-frame point. The point may lie behind the image plane
// (theta > fov/2); the pixel is still returned with visible = false. A point
// at the camera center is an error.
Projection project(const FisheyeCamera& cam, const Vec3& point);

// Unit ray for a pixel; inverse of project up to scale. Pixels beyond the
// fov radius are an error.
Vec3 unproject(const FisheyeCamera& cam, const Vec2& pixel);

// Rig-frame point expressed in the camera frame (mount applied).
Vec3 to_camera(const FisheyeCamera& cam, const Vec3& rig_point);

// Gaussian perturbation of the mount transform, deterministic per seed.
FisheyeCamera jitter_mount(const FisheyeCamera& cam, std::uint64_t seed,
                           double trans_sigma, double rot_sigma);

}  // namespace ego
