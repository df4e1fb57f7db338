#pragma once

#include <Eigen/Core>
#include <array>
#include <vector>

#include "ego/common.hpp"
#include "ego/tensor.hpp"

namespace ego {

// 2D joint locations in heatmap coordinates plus per-joint visibility.
struct Joints2D {
  Eigen::Matrix<double, kNumHeatmapJoints, 2> uv = Eigen::Matrix<double, kNumHeatmapJoints, 2>::Zero();
  std::array<bool, kNumHeatmapJoints> visible{};
};

// 15-channel square confidence maps, values in [0, 1]. Channel layout is
// (row v, col u); cell centers sit at integer coordinates.
struct HeatmapStack {
  int size = kHeatmapSize;
  std::vector<Eigen::ArrayXXf> channels;  // kNumHeatmapJoints arrays, size x size

  HeatmapStack() = default;
  explicit HeatmapStack(int s)
      : size(s), channels(kNumHeatmapJoints, Eigen::ArrayXXf::Zero(s, s)) {}
};

// Image pixel -> heatmap coordinate scaling (47/368 by default).
inline double to_heatmap_scale(int heatmap_size = kHeatmapSize, int image_size = kImageSize) {
  return static_cast<double>(heatmap_size) / static_cast<double>(image_size);
}

// Gaussian rendering: channel j holds exp(-((u-u_j)^2+(v-v_j)^2)/(2 sigma^2))
// sampled at cell centers and normalized so the peak cell is exactly 1.
// Invisible joints yield all-zero channels.
HeatmapStack render(const Joints2D& joints, double sigma, int size = kHeatmapSize);

struct Decoded {
  Joints2D joints;
  std::array<double, kNumHeatmapJoints> confidence{};
};

// Sub-pixel decode: softmax-weighted centroid over a 5x5 window around the
// channel argmax; confidence is the peak value; peaks below the threshold
// flag the joint invisible. Equal peaks break the tie toward the lowest
// linear (row-major) index.
Decoded decode(const HeatmapStack& hm, double visibility_threshold = 0.05);

// Bilinear resampling (align-corners) to one of the supported sizes
// {8, 16, 24, 36, 48} or back to the source size.
HeatmapStack resample(const HeatmapStack& hm, int size);

// (15, s, s) tensor packing for the network boundary.
TensorF to_tensor(const HeatmapStack& hm);
HeatmapStack from_tensor(const TensorF& t);

}  // namespace ego
