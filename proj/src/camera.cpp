#include "ego/camera.hpp"

#include <cmath>

#include "ego/rng.hpp"

namespace ego {

void FisheyeCamera::validate() const {
  if (focal <= 0.0) throw ConfigError("camera focal must be positive");
  if (fov <= 0.0 || fov > 2.0 * M_PI) throw ConfigError("camera fov out of range");
  if (width <= 0 || height <= 0) throw ConfigError("camera image size must be positive");
  if (principal_point.x() < 0 || principal_point.x() >= width ||
      principal_point.y() < 0 || principal_point.y() >= height)
    throw ConfigError("principal point must lie inside the image");
}

Projection project(const FisheyeCamera& cam, const Vec3& point) {
  const double n = point.norm();
  if (n < 1e-12) throw NumericError("project: point at the camera center");
  const double rxy = std::hypot(point.x(), point.y());
  const double theta = std::atan2(rxy, point.z());
  Vec2 pixel = cam.principal_point;
  if (rxy > 0.0) {
    const double radius = cam.focal * theta;
    pixel += radius * Vec2(point.x() / rxy, point.y() / rxy);
  }
  const bool in_bounds = pixel.x() >= 0.0 && pixel.x() < cam.width && pixel.y() >= 0.0 &&
                         pixel.y() < cam.height;
  return {pixel, theta <= 0.5 * cam.fov && in_bounds};
}

Vec3 unproject(const FisheyeCamera& cam, const Vec2& pixel) {
  const Vec2 d = pixel - cam.principal_point;
  const double radius = d.norm();
  const double max_radius = cam.focal * 0.5 * cam.fov;
  if (radius > max_radius * (1.0 + 1e-12))
    throw NumericError("unproject: pixel radius beyond the fov circle");
  if (radius < 1e-12) return Vec3(0.0, 0.0, 1.0);
  const double theta = radius / cam.focal;
  const Vec2 dir = d / radius;
  const double s = std::sin(theta);
  return Vec3(s * dir.x(), s * dir.y(), std::cos(theta));
}

Vec3 to_camera(const FisheyeCamera& cam, const Vec3& rig_point) {
  return cam.mount_rotation * rig_point + cam.mount_translation;
}

FisheyeCamera jitter_mount(const FisheyeCamera& cam, std::uint64_t seed,
                           double trans_sigma, double rot_sigma) {
  if (trans_sigma < 0.0 || rot_sigma < 0.0)
    throw ConfigError("jitter sigmas must be non-negative");
  FisheyeCamera out = cam;
  Rng rng = Rng::stream(seed, "mount-jitter");
  for (int i = 0; i < 3; ++i) out.mount_translation[i] += trans_sigma * rng.gaussian();
  Vec3 axis(rng.gaussian(), rng.gaussian(), rng.gaussian());
  const double angle = rot_sigma * rng.gaussian();
  if (axis.norm() > 1e-12 && rot_sigma > 0.0)
    out.mount_rotation = canonical(axis_angle(axis, angle) * cam.mount_rotation);
  return out;
}

}  // namespace ego
