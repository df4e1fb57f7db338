#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ego/dataset.hpp"
#include "ego/network.hpp"

namespace ego {

enum class TrainStage { kDetector, kLifter, kEndToEnd };
TrainStage stage_from_name(const std::string& name);
const char* stage_name(TrainStage s);

struct TrainConfig {
  TrainStage stage = TrainStage::kLifter;
  int epochs = 30;
  double lr = 1e-3;
  int batch_size = 16;
  double hm_sigma = 2.0;
  bool use_2d_only = true;  // feed 2D-only records through the hm term
  // detector-like degradation of training heatmaps (lifter stage): Gaussian
  // jitter of the joint locations and random channel dropout, re-sampled per
  // epoch, deterministic per seed
  double hm_jitter_px = 0.0;
  double hm_drop_prob = 0.0;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  LifterConfig lifter;
  DetectorConfig detector;
  BranchConfig branches;
  LossWeights weights;
  std::uint64_t seed = 0;
  // end2end warm starts (fresh Xavier when empty)
  std::string init_detector_ckpt;
  std::string init_lifter_ckpt;
  // lifter stage: train on heatmaps predicted by this frozen detector instead
  // of ground-truth renders (the full-pipeline regime)
  std::string detector_inputs_ckpt;
};

struct TrainResult {
  double initial_val_loss = 0.0;
  double best_val_loss = 0.0;
  int best_epoch = -1;
  std::vector<std::string> log_lines;  // epoch<TAB>train<TAB>val[<TAB>val_mpjpe_mm]
};

// Runs one stage over a generated dataset directory and writes the best-val
// checkpoint to checkpoint_path. Fully deterministic per (config, seed).
TrainResult train(const std::string& dataset_dir, const TrainConfig& cfg,
                  const Skeleton& skel, const std::string& checkpoint_path,
                  const std::string& resume_from = "",
                  const nlohmann::json& extra_meta = nlohmann::json::object());

nlohmann::json lifter_cfg_to_json(const LifterConfig& cfg);
LifterConfig lifter_cfg_from_json(const nlohmann::json& j);
nlohmann::json detector_cfg_to_json(const DetectorConfig& cfg);
DetectorConfig detector_cfg_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Batched inference over trained checkpoints
// ---------------------------------------------------------------------------

struct Pipeline {
  Skeleton skel;
  LifterConfig lifter_cfg;
  BranchConfig branches;
  ParamStore<float> lifter;
  bool has_detector = false;
  DetectorConfig detector_cfg;
  ParamStore<float> detector;
  double image_mean = 0.0;
  double image_std = 1.0;
  double hm_sigma = 2.0;
  std::string config_hash;
};

Pipeline load_pipeline(const std::string& lifter_checkpoint,
                       const std::string& detector_checkpoint = "");

// Loads a detector-only checkpoint (no lifting network required).
Pipeline load_pipeline_detector_only(const std::string& detector_checkpoint);

struct InferenceResult {
  std::vector<Pose3D> poses;
  std::vector<LocalRotations> rotations;        // empty when the branch is off
  std::vector<std::array<double, kNumHeatmapJoints>> confidence;
};

// Runs the encoder and the requested branches only. Heatmaps come from the
// ground-truth joints (from_images = false) or from the detector; optional
// white Gaussian noise with the given sigma is added to normalized images.
InferenceResult infer_records(Pipeline& pipe, const std::vector<SampleRecord>& records,
                              bool from_images, bool want_rotations,
                              double image_noise_sigma = 0.0,
                              std::uint64_t noise_seed = 0);

// Helpers shared by training and inference.
TensorF heatmaps_tensor(const std::vector<const SampleRecord*>& batch, double sigma,
                        int hm_in);
TensorF images_tensor(const std::vector<const SampleRecord*>& batch, double mean, double std,
                      double noise_sigma = 0.0, Rng* noise_rng = nullptr);
std::pair<double, double> image_stats(const std::vector<SampleRecord>& records);

}  // namespace ego
