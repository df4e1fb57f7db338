#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ego/heatmap.hpp"
#include "ego/kinematics.hpp"
#include "ego/params.hpp"

// The 2D detector and the multi-branch lifting autoencoder as tape graph
// builders, templated on scalar so the full loss can be gradient-checked in
// double precision.

namespace ego {

// ---------------------------------------------------------------------------
// Configurations
// ---------------------------------------------------------------------------

struct BranchConfig {
  bool rot = true;
  bool hm = true;  // the pose branch is always enabled

  const char* mode_name() const {
    if (rot && hm) return "p3d+hm+rot";
    if (hm) return "p3d+hm";
    if (rot) return "p3d+rot";
    return "p3d";
  }
  static BranchConfig from_mode(const std::string& mode);
};

struct LossWeights {
  double p = 1e-1;
  double r = 1e-1;
  double hm = 1e-3;
  double theta = -1e-2;
  double len = 0.5;
};

struct DetectorConfig {
  // five stride-2 blocks then one stride-1 block; kernel 4 on the stride-2
  // blocks, 3 on the last; deconv head kernel 3 stride 2
  std::vector<int> channels{12, 24, 48, 48, 96, 64};
  int head_channels = 48;
  int image_size = kImageSize;
  double leaky = 0.2;
};

struct LifterConfig {
  int hm_in = kHeatmapSize;  // input heatmap resolution
  int z_size = 50;
  int hm_size = 48;          // reconstruction-branch output resolution
  std::vector<int> encoder_channels{32, 64, 128, 256};
  std::vector<int> pose_widths{128, 128};
  std::vector<int> rot_widths{128, 128};
  int hm_dense_width = 256;
  int hm_deconv_last = 32;  // channel width feeding the final deconv
  double leaky = 0.2;

  // deconv chain for a reconstruction size: start grid and step count
  struct HmChain {
    int start;
    int steps;
  };
  static HmChain hm_chain(int size);
};

// ---------------------------------------------------------------------------
// Parameter creation (Xavier weights, zero biases, unit batchnorm)
// ---------------------------------------------------------------------------

template <typename S>
void init_detector(ParamStore<S>& store, const DetectorConfig& cfg, std::uint64_t seed);

template <typename S>
void init_lifter(ParamStore<S>& store, const LifterConfig& cfg, const BranchConfig& branches,
                 std::uint64_t seed);

// ---------------------------------------------------------------------------
// Forward graphs
// ---------------------------------------------------------------------------

// image (B,3,368,368) normalized -> heatmaps (B,15,47,47)
template <typename S>
Var<S> detector_forward(Tape<S>& tape, ParamStore<S>& store, const DetectorConfig& cfg,
                        Var<S> image, bool train, bool trainable = true);

template <typename S>
struct LifterOutputs {
  Var<S> pose;  // (B, 48)
  Var<S> rot;   // (B, 64), rows of unit quaternions; only when enabled
  Var<S> hm;    // (B, 15, s, s); only when enabled
  Var<S> z;     // (B, z_size)
  bool has_rot = false;
  bool has_hm = false;
};

// heatmaps (B,15,hm_in,hm_in) -> pose / rotations / reconstruction / code
template <typename S>
LifterOutputs<S> lifter_forward(Tape<S>& tape, ParamStore<S>& store, const LifterConfig& cfg,
                                const BranchConfig& branches, Var<S> heatmaps, bool train,
                                bool trainable = true);

// Differentiable r(P): the taped mirror of kinematics::extract_rotations for
// one 48-element pose vector; returns 16 quaternions flattened to (64,).
template <typename S>
Var<S> taped_extract_rotations(Tape<S>& tape, Var<S> pose48, const Skeleton& skel);

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

// Supervision for one batch. Pose rows hold 16x3 positions; samples without
// 3D labels contribute only through the heatmap-reconstruction term.
template <typename S>
struct BatchTargets {
  Tensor<S> pose;              // (B, 48); rows for 2D-only samples are ignored
  std::vector<char> has_3d;    // per sample
  Tensor<S> hm;                // (B, 15, s, s) reconstruction target
};

// L_AE: lambda_p (|P - P^|^2 + lambda_theta * theta + lambda_len * L)
//       + lambda_r |R^ - r(P^)|^2 + lambda_hm |HM^ - HM~|^2,
// averaged over the batch; theta sums per-limb cosine similarities and L sums
// unsquared limb-vector differences; 2D-only samples force lambda_p and
// lambda_r to zero; the rotation distance takes the better of q and -q.
template <typename S>
Var<S> loss_ae(Tape<S>& tape, const LifterOutputs<S>& out, const BatchTargets<S>& targets,
               const LossWeights& weights, const Skeleton& skel);

BranchConfig branch_config_from_mode(const std::string& mode);

}  // namespace ego
