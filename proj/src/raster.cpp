#include "ego/raster.hpp"

#include <algorithm>
#include <cmath>

#include "ego/rng.hpp"

namespace ego {

namespace {

double dist_to_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 < 1e-12) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

void stamp_segment(std::vector<float>& coverage, int width, int height, const Vec2& a,
                   const Vec2& b, double half_width) {
  const double margin = half_width + 1.5;
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x(), b.x()) - margin)));
  const int x1 = std::min(width - 1, static_cast<int>(std::ceil(std::max(a.x(), b.x()) + margin)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y(), b.y()) - margin)));
  const int y1 = std::min(height - 1, static_cast<int>(std::ceil(std::max(a.y(), b.y()) + margin)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double d = dist_to_segment(Vec2(x, y), a, b);
      const double c = std::clamp(half_width + 0.5 - d, 0.0, 1.0);
      if (c > 0.0) {
        float& cell = coverage[static_cast<std::size_t>(y) * width + x];
        cell = std::max(cell, static_cast<float>(c));
      }
    }
}

}  // namespace

Image rasterize(const Pose3D& pose, const Skeleton& skel, const FisheyeCamera& cam,
                const StickStyle& style, std::uint64_t noise_seed) {
  Image img;
  img.width = cam.width;
  img.height = cam.height;
  img.rgb.assign(static_cast<std::size_t>(cam.width) * cam.height * 3, 0);

  // project all joints; far-out pixels are clipped by the stamp bbox
  std::array<Vec2, kNumJoints> px;
  std::array<bool, kNumJoints> ok{};
  for (int j = 0; j < kNumJoints; ++j) {
    const Vec3 p = pose.row(j).transpose();
    if (p.norm() < 1e-9) {
      ok[static_cast<std::size_t>(j)] = false;
      continue;
    }
    const Projection pr = project(cam, p);
    px[static_cast<std::size_t>(j)] = pr.pixel;
    ok[static_cast<std::size_t>(j)] = pr.pixel.allFinite();
  }

  std::vector<float> coverage(static_cast<std::size_t>(cam.width) * cam.height, 0.0f);
  for (int j = 0; j < kNumJoints; ++j) {
    const int p = skel.parent[static_cast<std::size_t>(j)];
    if (p < 0 || !ok[static_cast<std::size_t>(j)] || !ok[static_cast<std::size_t>(p)]) continue;
    stamp_segment(coverage, cam.width, cam.height, px[static_cast<std::size_t>(p)],
                  px[static_cast<std::size_t>(j)], 0.5 * style.thickness);
  }
  if (style.joint_radius > 0.0)
    for (int j = 0; j < kNumJoints; ++j) {
      if (!ok[static_cast<std::size_t>(j)]) continue;
      stamp_segment(coverage, cam.width, cam.height, px[static_cast<std::size_t>(j)],
                    px[static_cast<std::size_t>(j)], style.joint_radius);
    }

  // scene light only exists inside the fov circle
  const double max_r2 = cam.focal * 0.5 * cam.fov * cam.focal * 0.5 * cam.fov;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const double dx = x - cam.principal_point.x();
      const double dy = y - cam.principal_point.y();
      if (dx * dx + dy * dy > max_r2)
        coverage[static_cast<std::size_t>(y) * cam.width + x] = 0.0f;
    }

  Rng rng = Rng::stream(noise_seed, "raster-noise");
  const bool noisy = style.noise > 0.0;
  for (std::size_t i = 0; i < coverage.size(); ++i) {
    double bg[3] = {static_cast<double>(style.background[0]),
                    static_cast<double>(style.background[1]),
                    static_cast<double>(style.background[2])};
    if (noisy) {
      const double n = rng.uniform(-style.noise, style.noise);
      for (double& b : bg) b += n;
    }
    const double c = coverage[i];
    for (int k = 0; k < 3; ++k) {
      const double v = (1.0 - c) * bg[k] + c * style.foreground[static_cast<std::size_t>(k)];
      img.rgb[i * 3 + static_cast<std::size_t>(k)] =
          static_cast<std::uint8_t>(std::clamp(v + 0.5, 0.0, 255.0));
    }
  }
  return img;
}

}  // namespace ego
