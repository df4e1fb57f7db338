#include "ego/heatmap.hpp"

#include <algorithm>
#include <cmath>

namespace ego {

HeatmapStack render(const Joints2D& joints, double sigma, int size) {
  if (sigma <= 0.0) throw ConfigError("render: sigma must be positive");
  HeatmapStack hm(size);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  const int window = static_cast<int>(std::ceil(5.0 * sigma));  // tails < 4e-6
  for (int c = 0; c < kNumHeatmapJoints; ++c) {
    if (!joints.visible[static_cast<std::size_t>(c)]) continue;
    const double u = joints.uv(c, 0), v = joints.uv(c, 1);
    const int r0 = std::max(0, static_cast<int>(std::floor(v)) - window);
    const int r1 = std::min(size - 1, static_cast<int>(std::ceil(v)) + window);
    const int c0 = std::max(0, static_cast<int>(std::floor(u)) - window);
    const int c1 = std::min(size - 1, static_cast<int>(std::ceil(u)) + window);
    auto& ch = hm.channels[static_cast<std::size_t>(c)];
    float peak = 0.0f;
    for (int r = r0; r <= r1; ++r)
      for (int cc = c0; cc <= c1; ++cc) {
        const double du = cc - u, dv = r - v;
        const float val = static_cast<float>(std::exp(-(du * du + dv * dv) * inv));
        ch(r, cc) = val;
        peak = std::max(peak, val);
      }
    if (peak > 0.0f)
      ch /= peak;  // exact 1.0 at the peak cell
    else
      ch.setZero();
  }
  return hm;
}

Decoded decode(const HeatmapStack& hm, double visibility_threshold) {
  Decoded out;
  const int size = hm.size;
  for (int c = 0; c < kNumHeatmapJoints; ++c) {
    const auto& ch = hm.channels[static_cast<std::size_t>(c)];
    // row-major scan keeps the first of equal peaks (lowest linear index)
    float peak = ch(0, 0);
    int pr = 0, pc = 0;
    for (int r = 0; r < size; ++r)
      for (int cc = 0; cc < size; ++cc)
        if (ch(r, cc) > peak) {
          peak = ch(r, cc);
          pr = r;
          pc = cc;
        }
    out.confidence[static_cast<std::size_t>(c)] = peak;
    if (peak < visibility_threshold) {
      out.joints.visible[static_cast<std::size_t>(c)] = false;
      out.joints.uv.row(c).setZero();
      if (peak <= 0.0f) out.confidence[static_cast<std::size_t>(c)] = 0.0;
      continue;
    }
    const int r0 = std::max(0, pr - 2), r1 = std::min(size - 1, pr + 2);
    const int c0 = std::max(0, pc - 2), c1 = std::min(size - 1, pc + 2);
    // softmax-weighted centroid; temperature chosen for sub-quarter-pixel
    // accuracy over sigma in [1.5, 3] on peak-normalized maps
    constexpr double kTemperature = 10.0;
    double wsum = 0.0, usum = 0.0, vsum = 0.0;
    for (int r = r0; r <= r1; ++r)
      for (int cc = c0; cc <= c1; ++cc) {
        const double w = std::exp(kTemperature * (static_cast<double>(ch(r, cc)) - peak));
        wsum += w;
        usum += w * cc;
        vsum += w * r;
      }
    out.joints.uv(c, 0) = usum / wsum;
    out.joints.uv(c, 1) = vsum / wsum;
    out.joints.visible[static_cast<std::size_t>(c)] = true;
  }
  return out;
}

HeatmapStack resample(const HeatmapStack& hm, int size) {
  static constexpr int kSizes[] = {8, 16, 24, 36, 48};
  const bool supported = size == hm.size ||
                         std::find(std::begin(kSizes), std::end(kSizes), size) != std::end(kSizes);
  if (!supported) throw ConfigError("resample: unsupported size " + std::to_string(size));
  if (size == hm.size) return hm;
  HeatmapStack out(size);
  const double scale = size > 1 ? static_cast<double>(hm.size - 1) / (size - 1) : 0.0;
  for (int c = 0; c < kNumHeatmapJoints; ++c) {
    const auto& src = hm.channels[static_cast<std::size_t>(c)];
    auto& dst = out.channels[static_cast<std::size_t>(c)];
    for (int r = 0; r < size; ++r) {
      const double sv = r * scale;
      const int v0 = std::min(static_cast<int>(sv), hm.size - 1);
      const int v1 = std::min(v0 + 1, hm.size - 1);
      const double fv = sv - v0;
      for (int cc = 0; cc < size; ++cc) {
        const double su = cc * scale;
        const int u0 = std::min(static_cast<int>(su), hm.size - 1);
        const int u1 = std::min(u0 + 1, hm.size - 1);
        const double fu = su - u0;
        const double val = (1 - fv) * ((1 - fu) * src(v0, u0) + fu * src(v0, u1)) +
                           fv * ((1 - fu) * src(v1, u0) + fu * src(v1, u1));
        dst(r, cc) = static_cast<float>(val);
      }
    }
  }
  return out;
}

TensorF to_tensor(const HeatmapStack& hm) {
  TensorF t({kNumHeatmapJoints, hm.size, hm.size});
  float* p = t.data();
  for (int c = 0; c < kNumHeatmapJoints; ++c)
    for (int r = 0; r < hm.size; ++r)
      for (int cc = 0; cc < hm.size; ++cc) *p++ = hm.channels[static_cast<std::size_t>(c)](r, cc);
  return t;
}

HeatmapStack from_tensor(const TensorF& t) {
  if (t.rank() != 3 || t.dim(0) != kNumHeatmapJoints || t.dim(1) != t.dim(2))
    throw DimensionError("from_tensor: expected (15, s, s)");
  HeatmapStack hm(t.dim(1));
  const float* p = t.data();
  for (int c = 0; c < kNumHeatmapJoints; ++c)
    for (int r = 0; r < hm.size; ++r)
      for (int cc = 0; cc < hm.size; ++cc) hm.channels[static_cast<std::size_t>(c)](r, cc) = *p++;
  return hm;
}

}  // namespace ego
