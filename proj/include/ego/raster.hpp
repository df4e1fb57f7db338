#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ego/camera.hpp"
#include "ego/kinematics.hpp"

namespace ego {

struct StickStyle {
  double thickness = 3.0;       // limb stroke width, pixels
  double joint_radius = 2.5;    // disc at visible joints
  std::array<std::uint8_t, 3> foreground{225, 220, 205};
  std::array<std::uint8_t, 3> background{30, 34, 44};
  double noise = 0.0;           // uniform background noise amplitude, 0..255
};

struct Image {
  int width = kImageSize;
  int height = kImageSize;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel
};

// Anti-aliased stick figure of a camera-frame pose. Limbs whose endpoints
// project far outside the image are clipped away; deterministic per
// (pose, camera, style, seed).
Image rasterize(const Pose3D& pose, const Skeleton& skel, const FisheyeCamera& cam,
                const StickStyle& style, std::uint64_t noise_seed = 0);

}  // namespace ego
