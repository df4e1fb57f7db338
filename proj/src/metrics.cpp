#include "ego/metrics.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace ego {

namespace {

void check_counts(const std::vector<Pose3D>& gt, const std::vector<Pose3D>& pred) {
  if (gt.size() != pred.size())
    throw DimensionError("pose sequence length mismatch: " + std::to_string(gt.size()) +
                         " vs " + std::to_string(pred.size()));
  if (gt.empty()) throw DimensionError("empty pose sequences");
}

}  // namespace

double mpjpe_mm(const std::vector<Pose3D>& gt, const std::vector<Pose3D>& pred) {
  check_counts(gt, pred);
  double acc = 0.0;
  for (std::size_t f = 0; f < gt.size(); ++f)
    for (int j = 0; j < kNumJoints; ++j) acc += (gt[f].row(j) - pred[f].row(j)).norm();
  return acc / (static_cast<double>(gt.size()) * kNumJoints) * 1000.0;
}

Similarity procrustes_align(const Eigen::Matrix<double, Eigen::Dynamic, 3>& src,
                            const Eigen::Matrix<double, Eigen::Dynamic, 3>& dst) {
  const auto n = src.rows();
  if (n < 3 || dst.rows() != n) throw DimensionError("procrustes needs >= 3 matched points");
  const Eigen::RowVector3d mu_s = src.colwise().mean();
  const Eigen::RowVector3d mu_d = dst.colwise().mean();
  const Eigen::Matrix<double, Eigen::Dynamic, 3> cs = src.rowwise() - mu_s;
  const Eigen::Matrix<double, Eigen::Dynamic, 3> cd = dst.rowwise() - mu_d;
  const double var_s = cs.squaredNorm() / static_cast<double>(n);
  const Eigen::Matrix3d cov = cd.transpose() * cs / static_cast<double>(n);
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d d = svd.singularValues();
  // coincident or collinear joint sets leave the rotation unconstrained
  if (var_s < 1e-12 || d(1) < 1e-12 * std::max(1.0, d(0)))
    throw NumericError("procrustes: degenerate joint configuration");
  Eigen::Vector3d s = Eigen::Vector3d::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) s(2) = -1.0;
  Similarity out;
  out.rotation = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  out.scale = d.dot(s) / var_s;
  out.translation = mu_d.transpose() - out.scale * out.rotation * mu_s.transpose();
  return out;
}

double pa_mpjpe_mm(const std::vector<Pose3D>& gt, const std::vector<Pose3D>& pred) {
  check_counts(gt, pred);
  double acc = 0.0;
  for (std::size_t f = 0; f < gt.size(); ++f) {
    const Similarity sim = procrustes_align(pred[f], gt[f]);
    for (int j = 0; j < kNumJoints; ++j) {
      const Vec3 aligned =
          sim.scale * (sim.rotation * pred[f].row(j).transpose()) + sim.translation;
      acc += (gt[f].row(j).transpose() - aligned).norm();
    }
  }
  return acc / (static_cast<double>(gt.size()) * kNumJoints) * 1000.0;
}

std::array<double, kNumJoints> per_joint_mm(const std::vector<Pose3D>& gt,
                                            const std::vector<Pose3D>& pred) {
  check_counts(gt, pred);
  std::array<double, kNumJoints> out{};
  for (std::size_t f = 0; f < gt.size(); ++f)
    for (int j = 0; j < kNumJoints; ++j)
      out[static_cast<std::size_t>(j)] += (gt[f].row(j) - pred[f].row(j)).norm();
  for (double& v : out) v = v / static_cast<double>(gt.size()) * 1000.0;
  return out;
}

EvalReport evaluate(const std::vector<SampleRecord>& records, const std::vector<Pose3D>& pred,
                    const Skeleton& skel, bool root_relative) {
  if (records.size() != pred.size())
    throw DimensionError("record/prediction count mismatch");
  std::vector<Pose3D> gt_poses, pred_poses;
  std::vector<ActionLabel> labels;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].has_3d) continue;
    Pose3D g = records[i].pose3d;
    Pose3D p = pred[i];
    if (root_relative) {
      const Eigen::RowVector3d rg = g.row(skel.root), rp = p.row(skel.root);
      g.rowwise() -= rg;
      p.rowwise() -= rp;
    }
    gt_poses.push_back(g);
    pred_poses.push_back(p);
    labels.push_back(records[i].action);
  }
  if (gt_poses.empty()) throw DimensionError("no labeled frames to evaluate");

  EvalReport report;
  report.n_frames = static_cast<int>(gt_poses.size());
  report.overall_mpjpe_mm = mpjpe_mm(gt_poses, pred_poses);
  report.pa_mpjpe_mm = pa_mpjpe_mm(gt_poses, pred_poses);
  report.per_joint = per_joint_mm(gt_poses, pred_poses);

  // per-action: restricted means; overall recomputed over all frames
  std::map<std::string, double> acc;
  std::map<std::string, int> count;
  for (std::size_t f = 0; f < gt_poses.size(); ++f) {
    double e = 0.0;
    for (int j = 0; j < kNumJoints; ++j)
      e += (gt_poses[f].row(j) - pred_poses[f].row(j)).norm();
    const std::string name = action_name(labels[f]);
    acc[name] += e / kNumJoints * 1000.0;
    count[name] += 1;
  }
  for (const auto& [name, total] : acc) {
    report.per_action[name] = total / count[name];
    report.per_action_frames[name] = count[name];
  }
  return report;
}

void write_report(const EvalReport& report, const Skeleton& skel, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json j;
  j["overall_mpjpe_mm"] = report.overall_mpjpe_mm;
  j["pa_mpjpe_mm"] = report.pa_mpjpe_mm;
  j["n_frames"] = report.n_frames;
  for (int i = 0; i < kNumJoints; ++i)
    j["per_joint_mm"][skel.joint_names[static_cast<std::size_t>(i)]] =
        report.per_joint[static_cast<std::size_t>(i)];
  j["per_action_mm"] = report.per_action;
  j["per_action_frames"] = report.per_action_frames;
  j["config_echo"] = report.config_echo;
  std::ofstream jf(fs::path(dir) / "report.json");
  if (!jf) throw IoError("cannot write report.json in " + dir);
  jf << j.dump(2) << "\n";

  std::ofstream tf(fs::path(dir) / "report.tsv");
  if (!tf) throw IoError("cannot write report.tsv in " + dir);
  tf << "metric\tvalue_mm\n";
  tf << "overall\t" << report.overall_mpjpe_mm << "\n";
  tf << "pa\t" << report.pa_mpjpe_mm << "\n";
  for (const auto& [name, v] : report.per_action) tf << "action:" << name << "\t" << v << "\n";
  for (int i = 0; i < kNumJoints; ++i)
    tf << "joint:" << skel.joint_names[static_cast<std::size_t>(i)] << "\t"
       << report.per_joint[static_cast<std::size_t>(i)] << "\n";
}

std::vector<NoiseRow> noise_sweep(Pipeline& pipe, const std::vector<SampleRecord>& records,
                                  const Skeleton& skel, const std::vector<double>& sigmas,
                                  const std::vector<std::uint64_t>& noise_seeds,
                                  bool root_relative) {
  if (!pipe.has_detector) throw ConfigError("noise sweep needs an image pipeline");
  if (sigmas.empty() || sigmas.front() != 0.0)
    throw ConfigError("noise sweep sigmas must start at 0");
  for (std::size_t i = 1; i < sigmas.size(); ++i)
    if (sigmas[i] <= sigmas[i - 1]) throw ConfigError("noise sweep sigmas must be ascending");
  if (noise_seeds.empty()) throw ConfigError("noise sweep needs at least one seed");

  std::vector<NoiseRow> rows;
  for (double sigma : sigmas) {
    double acc = 0.0, acc2 = 0.0;
    for (std::uint64_t seed : noise_seeds) {
      InferenceResult inf = infer_records(pipe, records, true, false, sigma, seed);
      const double e = evaluate(records, inf.poses, skel, root_relative).overall_mpjpe_mm;
      acc += e;
      acc2 += e * e;
    }
    const double n = static_cast<double>(noise_seeds.size());
    const double mean = acc / n;
    const double var = std::max(0.0, acc2 / n - mean * mean);
    rows.push_back({sigma, mean, std::sqrt(var)});
  }
  return rows;
}

RotationTrace rotation_trace(const std::vector<LocalRotations>& gt,
                             const std::vector<LocalRotations>& pred, int joint) {
  if (gt.size() != pred.size()) throw DimensionError("rotation trace length mismatch");
  if (joint < 0 || joint >= kNumJoints) throw DimensionError("rotation trace joint out of range");
  RotationTrace tr;
  for (std::size_t f = 0; f < gt.size(); ++f) {
    const Quat& g = gt[f].q[static_cast<std::size_t>(joint)];
    const Quat& p = pred[f].q[static_cast<std::size_t>(joint)];
    tr.gt_angle.push_back(quat_angle(g));
    tr.pred_angle.push_back(quat_angle(p));
    tr.error.push_back(g.angularDistance(p));
  }
  auto jitter = [](const std::vector<double>& a) {
    if (a.size() < 3) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 2; i < a.size(); ++i) acc += std::abs(a[i] - 2 * a[i - 1] + a[i - 2]);
    return acc / static_cast<double>(a.size() - 2);
  };
  tr.gt_jitter = jitter(tr.gt_angle);
  tr.pred_jitter = jitter(tr.pred_angle);
  return tr;
}

}  // namespace ego
