#include "ego/train.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ego/checkpoint.hpp"

namespace ego {

TrainStage stage_from_name(const std::string& name) {
  if (name == "detector") return TrainStage::kDetector;
  if (name == "lifter") return TrainStage::kLifter;
  if (name == "end2end") return TrainStage::kEndToEnd;
  throw ConfigError("unknown training stage: " + name);
}

const char* stage_name(TrainStage s) {
  switch (s) {
    case TrainStage::kDetector: return "detector";
    case TrainStage::kLifter: return "lifter";
    case TrainStage::kEndToEnd: return "end2end";
  }
  return "?";
}

nlohmann::json lifter_cfg_to_json(const LifterConfig& cfg) {
  return {{"hm_in", cfg.hm_in},
          {"z_size", cfg.z_size},
          {"hm_size", cfg.hm_size},
          {"encoder_channels", cfg.encoder_channels},
          {"pose_widths", cfg.pose_widths},
          {"rot_widths", cfg.rot_widths},
          {"hm_dense_width", cfg.hm_dense_width},
          {"hm_deconv_last", cfg.hm_deconv_last},
          {"leaky", cfg.leaky}};
}

LifterConfig lifter_cfg_from_json(const nlohmann::json& j) {
  LifterConfig cfg;
  cfg.hm_in = j.at("hm_in");
  cfg.z_size = j.at("z_size");
  cfg.hm_size = j.at("hm_size");
  cfg.encoder_channels = j.at("encoder_channels").get<std::vector<int>>();
  cfg.pose_widths = j.at("pose_widths").get<std::vector<int>>();
  cfg.rot_widths = j.at("rot_widths").get<std::vector<int>>();
  cfg.hm_dense_width = j.at("hm_dense_width");
  cfg.hm_deconv_last = j.at("hm_deconv_last");
  cfg.leaky = j.at("leaky");
  return cfg;
}

nlohmann::json detector_cfg_to_json(const DetectorConfig& cfg) {
  return {{"channels", cfg.channels},
          {"head_channels", cfg.head_channels},
          {"image_size", cfg.image_size},
          {"leaky", cfg.leaky}};
}

DetectorConfig detector_cfg_from_json(const nlohmann::json& j) {
  DetectorConfig cfg;
  cfg.channels = j.at("channels").get<std::vector<int>>();
  cfg.head_channels = j.at("head_channels");
  cfg.image_size = j.at("image_size");
  cfg.leaky = j.at("leaky");
  return cfg;
}

// ---------------------------------------------------------------------------
// Batch assembly
// ---------------------------------------------------------------------------

TensorF heatmaps_tensor(const std::vector<const SampleRecord*>& batch, double sigma,
                        int hm_in) {
  const int B = static_cast<int>(batch.size());
  TensorF t({B, kNumHeatmapJoints, hm_in, hm_in});
  const std::int64_t per = static_cast<std::int64_t>(kNumHeatmapJoints) * hm_in * hm_in;
  for (int b = 0; b < B; ++b) {
    TensorF one = to_tensor(render(batch[static_cast<std::size_t>(b)]->joints2d, sigma, hm_in));
    t.flat().segment(b * per, per) = one.flat();
  }
  return t;
}

TensorF images_tensor(const std::vector<const SampleRecord*>& batch, double mean, double std,
                      double noise_sigma, Rng* noise_rng) {
  const int B = static_cast<int>(batch.size());
  const int hw = kImageSize * kImageSize;
  TensorF t({B, 3, kImageSize, kImageSize});
  for (int b = 0; b < B; ++b) {
    const auto& img = batch[static_cast<std::size_t>(b)]->image;
    if (img.size() != static_cast<std::size_t>(hw) * 3)
      throw DimensionError("record has no stored image; regenerate the dataset with images=true");
    float* dst = t.data() + static_cast<std::int64_t>(b) * 3 * hw;
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < hw; ++i)
        dst[c * hw + i] = static_cast<float>(
            (img[static_cast<std::size_t>(i) * 3 + static_cast<std::size_t>(c)] / 255.0 - mean) /
            std);
  }
  if (noise_sigma > 0.0 && noise_rng)
    for (std::int64_t i = 0; i < t.numel(); ++i)
      t[i] += static_cast<float>(noise_sigma * noise_rng->gaussian());
  return t;
}

std::pair<double, double> image_stats(const std::vector<SampleRecord>& records) {
  double acc = 0.0, acc2 = 0.0;
  std::int64_t n = 0;
  for (const auto& r : records) {
    for (std::uint8_t v : r.image) {
      const double x = v / 255.0;
      acc += x;
      acc2 += x * x;
      ++n;
    }
  }
  if (n == 0) throw ConfigError("image statistics over a dataset without images");
  const double mean = acc / static_cast<double>(n);
  const double var = std::max(1e-8, acc2 / static_cast<double>(n) - mean * mean);
  return {mean, std::sqrt(var)};
}

namespace {

TensorF pose_targets(const std::vector<const SampleRecord*>& batch) {
  const int B = static_cast<int>(batch.size());
  TensorF t({B, kNumJoints * 3});
  for (int b = 0; b < B; ++b) {
    const auto& r = *batch[static_cast<std::size_t>(b)];
    for (int j = 0; j < kNumJoints; ++j)
      for (int k = 0; k < 3; ++k)
        t[static_cast<std::int64_t>(b) * kNumJoints * 3 + j * 3 + k] =
            static_cast<float>(r.pose3d(j, k));
  }
  return t;
}

// reconstruction target: the input stack resampled to the branch resolution
TensorF hm_recon_targets(const std::vector<Joints2D>& joints, double sigma, int hm_in,
                         int hm_size) {
  const int B = static_cast<int>(joints.size());
  TensorF t({B, kNumHeatmapJoints, hm_size, hm_size});
  const std::int64_t per = static_cast<std::int64_t>(kNumHeatmapJoints) * hm_size * hm_size;
  for (int b = 0; b < B; ++b) {
    HeatmapStack hm = render(joints[static_cast<std::size_t>(b)], sigma, hm_in);
    TensorF one = to_tensor(resample(hm, hm_size));
    t.flat().segment(b * per, per) = one.flat();
  }
  return t;
}

TensorF hm_recon_targets_from(const TensorF& predicted, int hm_size) {
  const int B = predicted.dim(0);
  const int src = predicted.dim(2);
  TensorF t({B, kNumHeatmapJoints, hm_size, hm_size});
  const std::int64_t per_in = static_cast<std::int64_t>(kNumHeatmapJoints) * src * src;
  const std::int64_t per_out = static_cast<std::int64_t>(kNumHeatmapJoints) * hm_size * hm_size;
  for (int b = 0; b < B; ++b) {
    TensorF one({kNumHeatmapJoints, src, src});
    one.flat() = predicted.flat().segment(b * per_in, per_in);
    TensorF res = to_tensor(resample(from_tensor(one), hm_size));
    t.flat().segment(b * per_out, per_out) = res.flat();
  }
  return t;
}

std::vector<char> has_3d_mask(const std::vector<const SampleRecord*>& batch) {
  std::vector<char> mask(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) mask[i] = batch[i]->has_3d ? 1 : 0;
  return mask;
}

// Detector-like degradation of ground-truth 2D joints, re-drawn every epoch.
Joints2D corrupt_joints(const SampleRecord& r, std::uint64_t seed, int epoch,
                        double jitter_px, double drop_prob) {
  Joints2D j = r.joints2d;
  Rng rng = Rng::stream(seed, "hm-degrade",
                        (static_cast<std::uint64_t>(r.character_id) << 24) ^ r.frame_id,
                        static_cast<std::uint64_t>(epoch));
  for (int c = 0; c < kNumHeatmapJoints; ++c) {
    const double du = rng.gaussian() * jitter_px;
    const double dv = rng.gaussian() * jitter_px;
    const double drop = rng.uniform();
    if (!j.visible[static_cast<std::size_t>(c)]) continue;
    if (drop < drop_prob) {
      j.visible[static_cast<std::size_t>(c)] = false;
      continue;
    }
    j.uv(c, 0) += du;
    j.uv(c, 1) += dv;
  }
  return j;
}

TensorF degraded_heatmaps_tensor(const std::vector<const SampleRecord*>& batch,
                                 const TrainConfig& cfg, int epoch, int hm_in,
                                 std::vector<Joints2D>* out_joints) {
  const int B = static_cast<int>(batch.size());
  TensorF t({B, kNumHeatmapJoints, hm_in, hm_in});
  const std::int64_t per = static_cast<std::int64_t>(kNumHeatmapJoints) * hm_in * hm_in;
  for (int b = 0; b < B; ++b) {
    Joints2D j = corrupt_joints(*batch[static_cast<std::size_t>(b)], cfg.seed, epoch,
                                cfg.hm_jitter_px, cfg.hm_drop_prob);
    if (out_joints) out_joints->push_back(j);
    TensorF one = to_tensor(render(j, cfg.hm_sigma, hm_in));
    t.flat().segment(b * per, per) = one.flat();
  }
  return t;
}

double mean_joint_error_mm(const Pose3D& a, const Pose3D& b) {
  double acc = 0.0;
  for (int j = 0; j < kNumJoints; ++j) acc += (a.row(j) - b.row(j)).norm();
  return acc / kNumJoints * 1000.0;
}

Pose3D pose_from_flat(const float* p) {
  Pose3D pose;
  for (int j = 0; j < kNumJoints; ++j)
    for (int k = 0; k < 3; ++k) pose(j, k) = p[j * 3 + k];
  return pose;
}

struct StageData {
  std::vector<SampleRecord> train;
  std::vector<SampleRecord> val;
};

}  // namespace

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

TrainResult train(const std::string& dataset_dir, const TrainConfig& cfg, const Skeleton& skel,
                  const std::string& checkpoint_path, const std::string& resume_from,
                  const nlohmann::json& extra_meta) {
  if (cfg.batch_size < 2) throw ConfigError("batch_size must be at least 2 (batchnorm)");
  StageData data;
  data.train = read_dataset(dataset_dir + "/train.egodata");
  data.val = read_dataset(dataset_dir + "/val.egodata");
  if (data.train.empty()) throw ConfigError("training split is empty");
  if (data.val.empty()) throw ConfigError("validation split is empty");

  const bool needs_images = cfg.stage != TrainStage::kLifter;
  const bool hm_branch = cfg.branches.hm;
  // records without 3D labels only carry signal through the hm term
  auto usable = [&](const SampleRecord& r) {
    if (needs_images && r.image.empty()) return false;
    if (cfg.stage == TrainStage::kDetector) return true;
    if (!r.has_3d && (!hm_branch || !cfg.use_2d_only)) return false;
    return true;
  };
  std::erase_if(data.train, [&](const SampleRecord& r) { return !usable(r); });
  std::erase_if(data.val, [&](const SampleRecord& r) {
    return (needs_images && r.image.empty()) || (cfg.stage != TrainStage::kDetector && !r.has_3d);
  });
  if (data.train.empty()) throw ConfigError("no usable training records for this stage");
  if (data.val.empty()) throw ConfigError("no usable validation records for this stage");

  // parameter store, possibly warm-started
  ParamStore<float> store;
  LifterConfig lifter_cfg = cfg.lifter;
  DetectorConfig det_cfg = cfg.detector;
  BranchConfig branches = cfg.branches;
  double img_mean = 0.0, img_std = 1.0;
  const bool has_lifter = cfg.stage != TrainStage::kDetector;
  const bool has_detector = cfg.stage != TrainStage::kLifter;

  if (!resume_from.empty()) {
    nlohmann::json meta = load_checkpoint(resume_from, store);
    if (meta.contains("lifter_cfg")) {
      lifter_cfg = lifter_cfg_from_json(meta.at("lifter_cfg"));
      branches = BranchConfig::from_mode(meta.value("branches", branches.mode_name()));
    }
    if (meta.contains("detector_cfg")) det_cfg = detector_cfg_from_json(meta.at("detector_cfg"));
    img_mean = meta.value("image_mean", 0.0);
    img_std = meta.value("image_std", 1.0);
  } else {
    if (has_detector) {
      if (!cfg.init_detector_ckpt.empty()) {
        nlohmann::json meta = load_checkpoint(cfg.init_detector_ckpt, store);
        det_cfg = detector_cfg_from_json(meta.at("detector_cfg"));
        img_mean = meta.value("image_mean", 0.0);
        img_std = meta.value("image_std", 1.0);
      } else {
        init_detector(store, det_cfg, Rng::stream(cfg.seed, "init-det").next_u64());
        auto [m, s] = image_stats(data.train);
        img_mean = m;
        img_std = s;
      }
    }
    if (has_lifter) {
      if (!cfg.init_lifter_ckpt.empty()) {
        nlohmann::json meta = load_checkpoint(cfg.init_lifter_ckpt, store);
        lifter_cfg = lifter_cfg_from_json(meta.at("lifter_cfg"));
        branches = BranchConfig::from_mode(meta.value("branches", branches.mode_name()));
      } else {
        init_lifter(store, lifter_cfg, branches, Rng::stream(cfg.seed, "init-lift").next_u64());
      }
    }
  }

  nlohmann::json meta = extra_meta;
  meta["kind"] = stage_name(cfg.stage);
  meta["branches"] = branches.mode_name();
  meta["hm_sigma"] = cfg.hm_sigma;
  meta["skeleton"] = nlohmann::json::parse(skeleton_to_json(skel));
  if (has_lifter) meta["lifter_cfg"] = lifter_cfg_to_json(lifter_cfg);
  if (has_detector) {
    meta["detector_cfg"] = detector_cfg_to_json(det_cfg);
    meta["image_mean"] = img_mean;
    meta["image_std"] = img_std;
  }

  // frozen-detector inputs for the lifter stage: predict every heatmap stack
  // once up front and train on the cache
  std::map<std::uint64_t, TensorF> hm_cache;
  const bool cached_inputs =
      cfg.stage == TrainStage::kLifter && !cfg.detector_inputs_ckpt.empty();
  auto cache_key = [](const SampleRecord& r) {
    return (static_cast<std::uint64_t>(r.character_id) << 32) | r.frame_id;
  };
  if (cached_inputs) {
    Pipeline det_pipe = load_pipeline_detector_only(cfg.detector_inputs_ckpt);
    meta["detector_inputs"] = cfg.detector_inputs_ckpt;
    auto fill = [&](std::vector<SampleRecord>& recs) {
      std::erase_if(recs, [](const SampleRecord& r) { return r.image.empty(); });
      const std::int64_t per =
          static_cast<std::int64_t>(kNumHeatmapJoints) * kHeatmapSize * kHeatmapSize;
      for (std::size_t i = 0; i < recs.size(); i += 16) {
        std::vector<const SampleRecord*> batch;
        for (std::size_t k = i; k < std::min(recs.size(), i + 16); ++k) batch.push_back(&recs[k]);
        Tape<float> tape;
        Var<float> img = make_constant(
            tape, images_tensor(batch, det_pipe.image_mean, det_pipe.image_std));
        Var<float> out =
            detector_forward(tape, det_pipe.detector, det_pipe.detector_cfg, img, false, false);
        for (std::size_t b = 0; b < batch.size(); ++b) {
          TensorF one({kNumHeatmapJoints, kHeatmapSize, kHeatmapSize});
          one.flat() = out.value().flat().segment(static_cast<std::int64_t>(b) * per, per);
          hm_cache.emplace(cache_key(*batch[b]), std::move(one));
        }
      }
    };
    if (lifter_cfg.hm_in != kHeatmapSize)
      throw ConfigError("detector inputs require the default 47x47 lifter input");
    fill(data.train);
    fill(data.val);
    if (data.train.empty() || data.val.empty())
      throw ConfigError("detector-input training needs stored images");
  }

  // one forward pass: loss (plus pose MPJPE against ground truth when the
  // stage predicts poses)
  auto run_batch = [&](const std::vector<const SampleRecord*>& batch, bool training, int epoch,
                       double* mpjpe_acc, int* mpjpe_n) -> double {
    Tape<float> tape;
    Var<float> loss;
    Var<float> pose_out{nullptr, -1};
    if (cfg.stage == TrainStage::kDetector) {
      Var<float> img = make_constant(tape, images_tensor(batch, img_mean, img_std));
      Var<float> out = detector_forward(tape, store, det_cfg, img, training, training);
      Var<float> target = make_constant(tape, heatmaps_tensor(batch, cfg.hm_sigma, kHeatmapSize));
      loss = mse(out, target);
    } else if (cfg.stage == TrainStage::kLifter) {
      const int B = static_cast<int>(batch.size());
      const std::int64_t per =
          static_cast<std::int64_t>(kNumHeatmapJoints) * lifter_cfg.hm_in * lifter_cfg.hm_in;
      TensorF hm_in({B, kNumHeatmapJoints, lifter_cfg.hm_in, lifter_cfg.hm_in});
      BatchTargets<float> targets;
      targets.pose = pose_targets(batch);
      targets.has_3d = has_3d_mask(batch);
      if (cached_inputs) {
        // inputs and reconstruction targets from the frozen detector
        if (branches.hm)
          targets.hm = TensorF({B, kNumHeatmapJoints, lifter_cfg.hm_size, lifter_cfg.hm_size});
        const std::int64_t per_out = static_cast<std::int64_t>(kNumHeatmapJoints) *
                                     lifter_cfg.hm_size * lifter_cfg.hm_size;
        for (int b = 0; b < B; ++b) {
          const TensorF& cached = hm_cache.at(cache_key(*batch[static_cast<std::size_t>(b)]));
          hm_in.flat().segment(b * per, per) = cached.flat();
          if (branches.hm) {
            TensorF res = to_tensor(resample(from_tensor(cached), lifter_cfg.hm_size));
            targets.hm.flat().segment(b * per_out, per_out) = res.flat();
          }
        }
      } else {
        const bool degrade = training && (cfg.hm_jitter_px > 0.0 || cfg.hm_drop_prob > 0.0);
        std::vector<Joints2D> joints;
        joints.reserve(batch.size());
        if (degrade) {
          for (const SampleRecord* r : batch)
            joints.push_back(corrupt_joints(*r, cfg.seed, epoch, cfg.hm_jitter_px,
                                            cfg.hm_drop_prob));
        } else {
          for (const SampleRecord* r : batch) joints.push_back(r->joints2d);
        }
        for (int b = 0; b < B; ++b) {
          TensorF one = to_tensor(render(joints[static_cast<std::size_t>(b)], cfg.hm_sigma,
                                         lifter_cfg.hm_in));
          hm_in.flat().segment(b * per, per) = one.flat();
        }
        if (branches.hm)
          targets.hm =
              hm_recon_targets(joints, cfg.hm_sigma, lifter_cfg.hm_in, lifter_cfg.hm_size);
      }
      Var<float> hm = make_constant(tape, std::move(hm_in));
      LifterOutputs<float> out =
          lifter_forward(tape, store, lifter_cfg, branches, hm, training, training);
      loss = loss_ae(tape, out, targets, cfg.weights, skel);
      pose_out = out.pose;
    } else {
      Var<float> img = make_constant(tape, images_tensor(batch, img_mean, img_std));
      Var<float> det_out = detector_forward(tape, store, det_cfg, img, training, training);
      Var<float> l2d =
          mse(det_out, make_constant(tape, heatmaps_tensor(batch, cfg.hm_sigma, kHeatmapSize)));
      LifterOutputs<float> out =
          lifter_forward(tape, store, lifter_cfg, branches, det_out, training, training);
      BatchTargets<float> targets;
      targets.pose = pose_targets(batch);
      targets.has_3d = has_3d_mask(batch);
      if (branches.hm) targets.hm = hm_recon_targets_from(det_out.value(), lifter_cfg.hm_size);
      loss = add(l2d, loss_ae(tape, out, targets, cfg.weights, skel));
      pose_out = out.pose;
    }
    const double loss_value = loss.value()[0];
    if (training) {
      tape.backward(loss.id);
      store.collect_grads(tape);
      store.step(static_cast<float>(cfg.lr), cfg.optimizer);
    } else if (mpjpe_acc && pose_out.id >= 0) {
      for (std::size_t b = 0; b < batch.size(); ++b) {
        if (!batch[b]->has_3d) continue;
        const Pose3D pred = pose_from_flat(pose_out.value().data() +
                                           static_cast<std::int64_t>(b) * kNumJoints * 3);
        *mpjpe_acc += mean_joint_error_mm(pred, batch[b]->pose3d);
        *mpjpe_n += 1;
      }
    }
    return loss_value;
  };

  auto evaluate_val = [&](double* mpjpe_out) -> double {
    double acc = 0.0;
    std::int64_t n = 0;
    double macc = 0.0;
    int mn = 0;
    for (std::size_t i = 0; i < data.val.size(); i += static_cast<std::size_t>(cfg.batch_size)) {
      std::vector<const SampleRecord*> batch;
      for (std::size_t k = i; k < std::min(data.val.size(), i + static_cast<std::size_t>(cfg.batch_size)); ++k)
        batch.push_back(&data.val[k]);
      acc += run_batch(batch, false, 0, &macc, &mn) * static_cast<double>(batch.size());
      n += static_cast<std::int64_t>(batch.size());
    }
    if (mpjpe_out) *mpjpe_out = mn > 0 ? macc / mn : 0.0;
    return acc / static_cast<double>(n);
  };

  TrainResult result;
  const bool wants_mpjpe = cfg.stage != TrainStage::kDetector;
  double val_mpjpe = 0.0;
  result.initial_val_loss = evaluate_val(wants_mpjpe ? &val_mpjpe : nullptr);
  result.best_val_loss = result.initial_val_loss;
  result.best_epoch = 0;
  save_checkpoint(checkpoint_path, store, meta);
  {
    std::ostringstream line;
    line << 0 << "\t" << "nan" << "\t" << result.initial_val_loss;
    if (wants_mpjpe) line << "\t" << val_mpjpe;
    result.log_lines.push_back(line.str());
  }

  std::vector<std::size_t> order(data.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle = Rng::stream(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.uniform_int(static_cast<int>(i)))]);

    double train_acc = 0.0;
    std::int64_t train_n = 0;
    int step_index = 0;
    for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(cfg.batch_size)) {
      std::vector<const SampleRecord*> batch;
      for (std::size_t k = i; k < std::min(order.size(), i + static_cast<std::size_t>(cfg.batch_size)); ++k)
        batch.push_back(&data.train[order[k]]);
      if (batch.size() < 2) break;  // batchnorm needs two samples
      try {
        train_acc += run_batch(batch, true, epoch, nullptr, nullptr) * static_cast<double>(batch.size());
      } catch (const NumericError& e) {
        throw NumericError("training aborted at epoch " + std::to_string(epoch) + " step " +
                           std::to_string(step_index) + ": " + e.what());
      }
      train_n += static_cast<std::int64_t>(batch.size());
      ++step_index;
    }
    const double train_loss = train_n ? train_acc / static_cast<double>(train_n) : 0.0;
    const double val_loss = evaluate_val(wants_mpjpe ? &val_mpjpe : nullptr);
    if (val_loss < result.best_val_loss) {
      result.best_val_loss = val_loss;
      result.best_epoch = epoch;
      save_checkpoint(checkpoint_path, store, meta);
    }
    std::ostringstream line;
    line << epoch << "\t" << train_loss << "\t" << val_loss;
    if (wants_mpjpe) line << "\t" << val_mpjpe;
    result.log_lines.push_back(line.str());
  }
  return result;
}

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

Pipeline load_pipeline_detector_only(const std::string& detector_checkpoint) {
  Pipeline pipe;
  nlohmann::json meta = load_checkpoint(detector_checkpoint, pipe.detector);
  if (!meta.contains("detector_cfg"))
    throw ConfigError("checkpoint has no detector: " + detector_checkpoint);
  pipe.detector_cfg = detector_cfg_from_json(meta.at("detector_cfg"));
  pipe.image_mean = meta.value("image_mean", 0.0);
  pipe.image_std = meta.value("image_std", 1.0);
  if (meta.contains("skeleton")) pipe.skel = skeleton_from_json(meta.at("skeleton").dump());
  pipe.has_detector = true;
  return pipe;
}

Pipeline load_pipeline(const std::string& lifter_checkpoint,
                       const std::string& detector_checkpoint) {
  Pipeline pipe;
  nlohmann::json meta = load_checkpoint(lifter_checkpoint, pipe.lifter);
  if (!meta.contains("lifter_cfg"))
    throw ConfigError("checkpoint has no lifting network: " + lifter_checkpoint);
  pipe.lifter_cfg = lifter_cfg_from_json(meta.at("lifter_cfg"));
  pipe.branches = BranchConfig::from_mode(meta.value("branches", std::string("p3d+hm+rot")));
  pipe.skel = skeleton_from_json(meta.at("skeleton").dump());
  pipe.hm_sigma = meta.value("hm_sigma", 2.0);
  pipe.config_hash = meta.value("config_hash", std::string());
  if (meta.contains("detector_cfg") && detector_checkpoint.empty()) {
    // end2end checkpoint: both networks in one file
    pipe.detector_cfg = detector_cfg_from_json(meta.at("detector_cfg"));
    nlohmann::json dmeta = load_checkpoint(lifter_checkpoint, pipe.detector);
    pipe.image_mean = meta.value("image_mean", 0.0);
    pipe.image_std = meta.value("image_std", 1.0);
    pipe.has_detector = true;
  } else if (!detector_checkpoint.empty()) {
    nlohmann::json dmeta = load_checkpoint(detector_checkpoint, pipe.detector);
    if (!dmeta.contains("detector_cfg"))
      throw ConfigError("checkpoint has no detector: " + detector_checkpoint);
    pipe.detector_cfg = detector_cfg_from_json(dmeta.at("detector_cfg"));
    pipe.image_mean = dmeta.value("image_mean", 0.0);
    pipe.image_std = dmeta.value("image_std", 1.0);
    pipe.has_detector = true;
  }
  return pipe;
}

InferenceResult infer_records(Pipeline& pipe, const std::vector<SampleRecord>& records,
                              bool from_images, bool want_rotations, double image_noise_sigma,
                              std::uint64_t noise_seed) {
  if (from_images && !pipe.has_detector)
    throw ConfigError("image inference requested but no detector checkpoint is loaded");
  InferenceResult res;
  res.poses.reserve(records.size());
  res.confidence.reserve(records.size());
  BranchConfig branches;
  branches.rot = want_rotations && pipe.branches.rot;
  branches.hm = false;  // reconstruction branch is train-time only
  Rng noise_rng = Rng::stream(noise_seed, "image-noise");
  const int step = 16;
  for (std::size_t i = 0; i < records.size(); i += step) {
    std::vector<const SampleRecord*> batch;
    for (std::size_t k = i; k < std::min(records.size(), i + step); ++k)
      batch.push_back(&records[k]);
    Tape<float> tape;
    Var<float> hm{nullptr, -1};
    if (from_images) {
      Var<float> img = make_constant(
          tape, images_tensor(batch, pipe.image_mean, pipe.image_std, image_noise_sigma,
                              &noise_rng));
      hm = detector_forward(tape, pipe.detector, pipe.detector_cfg, img, false, false);
    } else {
      hm = make_constant(tape, heatmaps_tensor(batch, pipe.hm_sigma, pipe.lifter_cfg.hm_in));
    }
    LifterOutputs<float> out =
        lifter_forward(tape, pipe.lifter, pipe.lifter_cfg, branches, hm, false, false);
    const std::int64_t hm_per = static_cast<std::int64_t>(kNumHeatmapJoints) *
                                pipe.lifter_cfg.hm_in * pipe.lifter_cfg.hm_in;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      res.poses.push_back(pose_from_flat(out.pose.value().data() +
                                         static_cast<std::int64_t>(b) * kNumJoints * 3));
      if (branches.rot) {
        LocalRotations rot;
        const float* q = out.rot.value().data() + static_cast<std::int64_t>(b) * kNumJoints * 4;
        for (int j = 0; j < kNumJoints; ++j)
          rot.q[static_cast<std::size_t>(j)] =
              canonical(Quat(q[j * 4 + 0], q[j * 4 + 1], q[j * 4 + 2], q[j * 4 + 3]));
        res.rotations.push_back(rot);
      }
      // confidences from the input heatmaps
      TensorF one({kNumHeatmapJoints, pipe.lifter_cfg.hm_in, pipe.lifter_cfg.hm_in});
      one.flat() = hm.value().flat().segment(static_cast<std::int64_t>(b) * hm_per, hm_per);
      Decoded dec = decode(from_tensor(one));
      res.confidence.push_back(dec.confidence);
    }
  }
  return res;
}

}  // namespace ego
