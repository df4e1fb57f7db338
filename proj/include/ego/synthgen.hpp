#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "ego/camera.hpp"
#include "ego/dataset.hpp"
#include "ego/motion.hpp"
#include "ego/raster.hpp"

namespace ego {

// Procedural dataset generation: seeded keyframe poses per (character,
// action) clip, slerp interpolation, per-clip camera mount jitter, fisheye
// projection, optional stick-figure rendering. (config, seed) fully
// determines the output bytes.
struct GenConfig {
  int train_frames = 5000;
  int val_frames = 500;
  int test_frames = 1000;
  int train_characters = 10;
  int val_characters = 2;
  int test_characters = 4;
  bool images = false;
  double twod_only_fraction = 0.0;  // train records emitted without 3D labels
  int steps_between = 4;
  double jitter_trans_sigma = 0.005;           // meters
  double jitter_rot_sigma = 0.0349065850398866;  // 2 degrees
  Vec3 root_center{0.0, -0.05, 0.18};
  Vec3 root_wander{0.03, 0.03, 0.04};  // uniform keyframe root motion, +-
  FisheyeCamera camera;
  StickStyle style;
};

struct GenSummary {
  nlohmann::json manifest;
  int total_records = 0;
};

// Writes train/val/test record files, the skeleton file, and manifest.json
// under out_dir.
GenSummary generate_dataset(const std::string& out_dir, const GenConfig& config,
                            const Skeleton& skel, std::uint64_t seed);

// Per-action scaling of the default swing limits (arms vs legs emphasis).
AngleLimits action_limits(const Skeleton& skel, ActionLabel action);

}  // namespace ego
