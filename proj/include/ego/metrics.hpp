#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ego/dataset.hpp"
#include "ego/train.hpp"

namespace ego {

// Mean per-joint position error in millimeters over frames and joints.
double mpjpe_mm(const std::vector<Pose3D>& gt, const std::vector<Pose3D>& pred);

// Per-frame similarity Procrustes alignment (rotation + uniform scale +
// translation, least squares, reflections excluded) of pred onto gt, then the
// mean joint error. Collinear or coincident joint sets are an error.
double pa_mpjpe_mm(const std::vector<Pose3D>& gt, const std::vector<Pose3D>& pred);

// Least-squares similarity transform aligning src points to dst points.
struct Similarity {
  Eigen::Matrix3d rotation;
  double scale;
  Vec3 translation;
};
Similarity procrustes_align(const Eigen::Matrix<double, Eigen::Dynamic, 3>& src,
                            const Eigen::Matrix<double, Eigen::Dynamic, 3>& dst);

std::array<double, kNumJoints> per_joint_mm(const std::vector<Pose3D>& gt,
                                            const std::vector<Pose3D>& pred);

struct EvalReport {
  double overall_mpjpe_mm = 0.0;
  double pa_mpjpe_mm = 0.0;
  std::array<double, kNumJoints> per_joint{};
  std::map<std::string, double> per_action;      // absent actions are omitted
  std::map<std::string, int> per_action_frames;
  int n_frames = 0;
  nlohmann::json config_echo;
};

// Full report over labeled records; only has_3d records participate.
// root_relative subtracts the root joint from both poses first.
EvalReport evaluate(const std::vector<SampleRecord>& records,
                    const std::vector<Pose3D>& pred, const Skeleton& skel,
                    bool root_relative = false);

// report.json plus a delimited per-action/per-joint table (report.tsv).
void write_report(const EvalReport& report, const Skeleton& skel, const std::string& dir);

struct NoiseRow {
  double sigma;
  double mean_mpjpe_mm;
  double std_mpjpe_mm;
};

// White Gaussian noise added to normalized images per sigma; every sigma is
// evaluated under each noise seed. Sigmas must be ascending and start at 0 so
// the first row reproduces the base evaluation exactly.
std::vector<NoiseRow> noise_sweep(Pipeline& pipe, const std::vector<SampleRecord>& records,
                                  const Skeleton& skel, const std::vector<double>& sigmas,
                                  const std::vector<std::uint64_t>& noise_seeds,
                                  bool root_relative = false);

struct RotationTrace {
  std::vector<double> gt_angle;    // geodesic angle from identity, radians
  std::vector<double> pred_angle;
  std::vector<double> error;       // angular distance gt vs pred
  double gt_jitter = 0.0;          // mean |second difference|
  double pred_jitter = 0.0;
};

RotationTrace rotation_trace(const std::vector<LocalRotations>& gt,
                             const std::vector<LocalRotations>& pred, int joint);

}  // namespace ego
