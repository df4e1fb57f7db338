// Command-line front end: generate | train | eval | ablate | animate |
// noise-sweep. All randomness flows from the single config seed; reruns with
// identical configs reproduce identical output bytes.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "ego/bvh.hpp"
#include "ego/checkpoint.hpp"
#include "ego/metrics.hpp"
#include "ego/runconfig.hpp"
#include "ego/synthgen.hpp"
#include "ego/train.hpp"

namespace fs = std::filesystem;
using namespace ego;

namespace {

struct CommonArgs {
  std::string config;
  std::string out = "out";
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "JSON config file");
  cmd->add_option("--out", args.out, "output directory");
  cmd->add_option("--seed", args.seed, "override the config seed");
  cmd->add_option("--set", args.sets, "override a config key, dotted.path=value");
}

RunConfig resolve(nlohmann::json defaults, const CommonArgs& args) {
  RunConfig cfg(std::move(defaults), {});
  cfg.merge_file(args.config);
  for (const std::string& s : args.sets) cfg.apply_override(s);
  if (args.seed) cfg.set("seed", *args.seed);
  cfg.validate();
  return cfg;
}

Vec3 vec3_of(const nlohmann::json& j) { return Vec3(j.at(0), j.at(1), j.at(2)); }

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

nlohmann::json generate_defaults() {
  return {
      {"seed", 0},
      {"frames", {{"train", 5000}, {"val", 500}, {"test", 1000}}},
      {"characters", {{"train", 10}, {"val", 2}, {"test", 4}}},
      {"images", false},
      {"twod_only_fraction", 0.0},
      {"steps_between", 4},
      {"jitter", {{"trans_sigma_m", 0.005}, {"rot_sigma_deg", 2.0}}},
      {"camera",
       {{"focal", 115.0}, {"width", 368}, {"height", 368}, {"fov_deg", 180.0},
        {"principal", {184.0, 184.0}}}},
      {"root", {{"center", {0.0, -0.05, 0.18}}, {"wander", {0.03, 0.03, 0.04}}}},
      {"style", {{"thickness", 3.0}, {"joint_radius", 2.5}, {"noise", 0.0}}},
      {"skeleton_file", ""},
  };
}

int cmd_generate(const RunConfig& cfg, const std::string& out) {
  GenConfig gen;
  gen.train_frames = cfg.get<int>("frames.train");
  gen.val_frames = cfg.get<int>("frames.val");
  gen.test_frames = cfg.get<int>("frames.test");
  gen.train_characters = cfg.get<int>("characters.train");
  gen.val_characters = cfg.get<int>("characters.val");
  gen.test_characters = cfg.get<int>("characters.test");
  gen.images = cfg.get<bool>("images");
  gen.twod_only_fraction = cfg.get<double>("twod_only_fraction");
  gen.steps_between = cfg.get<int>("steps_between");
  gen.jitter_trans_sigma = cfg.get<double>("jitter.trans_sigma_m");
  gen.jitter_rot_sigma = cfg.get<double>("jitter.rot_sigma_deg") * M_PI / 180.0;
  gen.camera.focal = cfg.get<double>("camera.focal");
  gen.camera.width = cfg.get<int>("camera.width");
  gen.camera.height = cfg.get<int>("camera.height");
  gen.camera.fov = cfg.get<double>("camera.fov_deg") * M_PI / 180.0;
  gen.camera.principal_point = Vec2(cfg.at("camera.principal").at(0),
                                    cfg.at("camera.principal").at(1));
  gen.root_center = vec3_of(cfg.at("root.center"));
  gen.root_wander = vec3_of(cfg.at("root.wander"));
  gen.style.thickness = cfg.get<double>("style.thickness");
  gen.style.joint_radius = cfg.get<double>("style.joint_radius");
  gen.style.noise = cfg.get<double>("style.noise");
  gen.camera.validate();

  const std::string skel_file = cfg.get<std::string>("skeleton_file");
  const Skeleton skel = skel_file.empty() ? default_skeleton() : load_skeleton(skel_file);

  GenSummary sum = generate_dataset(out, gen, skel, cfg.seed());
  cfg.write_echo(out);
  std::printf("generated %d records under %s\n", sum.total_records, out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

nlohmann::json train_defaults() {
  return {
      {"seed", 0},
      {"dataset", ""},
      {"stage", "lifter"},
      {"epochs", 30},
      {"lr", 1e-3},
      {"batch_size", 16},
      {"hm_sigma", 2.0},
      {"use_2d_only", true},
      {"hm_jitter_px", 0.0},
      {"hm_drop_prob", 0.0},
      {"optimizer", "adam"},
      {"branches", "p3d+hm+rot"},
      {"z_size", 50},
      {"hm_size", 48},
      {"lambda",
       {{"p", 0.1}, {"r", 0.1}, {"hm", 1e-3}, {"theta", -0.01}, {"len", 0.5}}},
      {"lifter",
       {{"encoder_channels", {32, 64, 128, 256}},
        {"pose_widths", {128, 128}},
        {"rot_widths", {128, 128}},
        {"hm_dense_width", 256},
        {"hm_deconv_last", 32}}},
      {"detector", {{"channels", {12, 24, 48, 48, 96, 64}}, {"head_channels", 48}}},
      {"resume", ""},
      {"init_detector", ""},
      {"init_lifter", ""},
      {"detector_inputs", ""},
      {"checkpoint_name", "checkpoint.ckpt"},
  };
}

TrainConfig train_config_of(const RunConfig& cfg) {
  TrainConfig tc;
  tc.stage = stage_from_name(cfg.get<std::string>("stage"));
  tc.epochs = cfg.get<int>("epochs");
  tc.lr = cfg.get<double>("lr");
  tc.batch_size = cfg.get<int>("batch_size");
  tc.hm_sigma = cfg.get<double>("hm_sigma");
  tc.use_2d_only = cfg.get<bool>("use_2d_only");
  tc.hm_jitter_px = cfg.get<double>("hm_jitter_px");
  tc.hm_drop_prob = cfg.get<double>("hm_drop_prob");
  const std::string opt = cfg.get<std::string>("optimizer");
  if (opt == "adam") tc.optimizer = OptimizerKind::kAdam;
  else if (opt == "sgd") tc.optimizer = OptimizerKind::kSgd;
  else throw ConfigError("optimizer must be adam or sgd");
  tc.branches = BranchConfig::from_mode(cfg.get<std::string>("branches"));
  tc.weights.p = cfg.get<double>("lambda.p");
  tc.weights.r = cfg.get<double>("lambda.r");
  tc.weights.hm = cfg.get<double>("lambda.hm");
  tc.weights.theta = cfg.get<double>("lambda.theta");
  tc.weights.len = cfg.get<double>("lambda.len");
  tc.lifter.z_size = cfg.get<int>("z_size");
  tc.lifter.hm_size = cfg.get<int>("hm_size");
  tc.lifter.encoder_channels = cfg.get<std::vector<int>>("lifter.encoder_channels");
  tc.lifter.pose_widths = cfg.get<std::vector<int>>("lifter.pose_widths");
  tc.lifter.rot_widths = cfg.get<std::vector<int>>("lifter.rot_widths");
  tc.lifter.hm_dense_width = cfg.get<int>("lifter.hm_dense_width");
  tc.lifter.hm_deconv_last = cfg.get<int>("lifter.hm_deconv_last");
  tc.detector.channels = cfg.get<std::vector<int>>("detector.channels");
  tc.detector.head_channels = cfg.get<int>("detector.head_channels");
  tc.seed = cfg.seed();
  tc.init_detector_ckpt = cfg.get<std::string>("init_detector");
  tc.init_lifter_ckpt = cfg.get<std::string>("init_lifter");
  tc.detector_inputs_ckpt = cfg.get<std::string>("detector_inputs");
  return tc;
}

void write_train_log(const std::string& path, TrainStage stage, const TrainResult& result) {
  std::ofstream log(path);
  if (!log) throw IoError("cannot write training log: " + path);
  log << (stage == TrainStage::kDetector ? "epoch\ttrain_loss\tval_loss"
                                         : "epoch\ttrain_loss\tval_loss\tval_mpjpe_mm")
      << "\n";
  for (const auto& line : result.log_lines) log << line << "\n";
}

int cmd_train(const RunConfig& cfg, const std::string& out) {
  const std::string dataset = cfg.get<std::string>("dataset");
  if (dataset.empty()) throw ConfigError("train: dataset directory is required");
  const Skeleton skel = load_skeleton(dataset + "/skeleton.json");
  TrainConfig tc = train_config_of(cfg);
  fs::create_directories(out);
  const std::string ckpt = (fs::path(out) / cfg.get<std::string>("checkpoint_name")).string();
  nlohmann::json extra{{"config_hash", cfg.hash()}};
  TrainResult result =
      train(dataset, tc, skel, ckpt, cfg.get<std::string>("resume"), extra);
  write_train_log((fs::path(out) / "train_log.tsv").string(), tc.stage, result);
  cfg.write_echo(out);
  std::printf("stage %s: best val loss %.6f at epoch %d (initial %.6f); checkpoint %s\n",
              stage_name(tc.stage), result.best_val_loss, result.best_epoch,
              result.initial_val_loss, ckpt.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

nlohmann::json eval_defaults() {
  return {{"seed", 0},       {"dataset", ""},
          {"split", "test"}, {"checkpoint", ""},
          {"detector_checkpoint", ""}, {"mode", "lifter"},
          {"root_relative", false}};
}

std::vector<SampleRecord> load_split(const std::string& dataset, const std::string& split) {
  if (split != "train" && split != "val" && split != "test")
    throw ConfigError("split must be train, val or test");
  return read_dataset(dataset + "/" + split + ".egodata");
}

int cmd_eval(const RunConfig& cfg, const std::string& out) {
  const std::string dataset = cfg.get<std::string>("dataset");
  const std::string mode = cfg.get<std::string>("mode");
  if (dataset.empty()) throw ConfigError("eval: dataset directory is required");
  if (mode != "lifter" && mode != "end2end" && mode != "oracle")
    throw ConfigError("eval mode must be lifter, end2end or oracle");
  std::vector<SampleRecord> records = load_split(dataset, cfg.get<std::string>("split"));

  std::vector<Pose3D> pred;
  Skeleton skel;
  std::string ckpt_hash = "-";
  if (mode == "oracle") {
    skel = load_skeleton(dataset + "/skeleton.json");
    for (const auto& r : records) pred.push_back(r.pose3d);
  } else {
    Pipeline pipe = load_pipeline(cfg.get<std::string>("checkpoint"),
                                  cfg.get<std::string>("detector_checkpoint"));
    skel = pipe.skel;
    ckpt_hash = pipe.config_hash.empty() ? "-" : pipe.config_hash;
    InferenceResult inf = infer_records(pipe, records, mode == "end2end", false);
    pred = std::move(inf.poses);
  }
  EvalReport report = evaluate(records, pred, skel, cfg.get<bool>("root_relative"));
  report.config_echo = {{"mode", mode},
                        {"dataset", dataset},
                        {"split", cfg.get<std::string>("split")},
                        {"checkpoint_config_hash", ckpt_hash},
                        {"eval_config_hash", cfg.hash()}};
  write_report(report, skel, out);
  cfg.write_echo(out);
  std::printf("mpjpe %.3f mm, pa-mpjpe %.3f mm over %d frames\n", report.overall_mpjpe_mm,
              report.pa_mpjpe_mm, report.n_frames);
  return 0;
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

nlohmann::json ablate_defaults() {
  nlohmann::json j = train_defaults();
  j.erase("stage");
  j.erase("resume");
  j.erase("init_detector");
  j.erase("init_lifter");
  j.erase("checkpoint_name");
  j["modes"] = {"p3d", "p3d+rot", "p3d+hm", "p3d+hm+rot"};
  j["seeds"] = nlohmann::json::array();
  j["z_grid"] = nlohmann::json::array();
  j["hm_grid"] = nlohmann::json::array();
  j["epochs"] = 8;
  return j;
}

int cmd_ablate(const RunConfig& cfg, const std::string& out) {
  const std::string dataset = cfg.get<std::string>("dataset");
  if (dataset.empty()) throw ConfigError("ablate: dataset directory is required");
  const Skeleton skel = load_skeleton(dataset + "/skeleton.json");
  fs::create_directories(out);

  std::vector<std::uint64_t> seeds = cfg.get<std::vector<std::uint64_t>>("seeds");
  if (seeds.empty()) seeds = {cfg.seed()};
  std::vector<SampleRecord> test = load_split(dataset, "test");

  auto run_one = [&](const std::string& mode, int z, int hm, std::uint64_t sd,
                     const std::string& tag) {
    RunConfig tcfg(train_defaults(), {});
    // shared training knobs flow through; mode/z/hm vary per row
    for (const char* key : {"epochs", "lr", "batch_size", "hm_sigma", "use_2d_only",
                            "hm_jitter_px", "hm_drop_prob", "detector_inputs", "optimizer",
                            "lambda", "lifter"})
      tcfg.set(key, cfg.at(key));
    tcfg.set("seed", sd);
    tcfg.set("branches", mode);
    tcfg.set("z_size", z);
    tcfg.set("hm_size", hm);
    TrainConfig tc = train_config_of(tcfg);
    tc.stage = TrainStage::kLifter;
    const std::string ckpt = (fs::path(out) / ("ckpt_" + tag + ".ckpt")).string();
    nlohmann::json extra{{"config_hash", tcfg.hash()}};
    train(dataset, tc, skel, ckpt, "", extra);
    // evaluate through the same input regime the lifter was trained on
    const std::string det = cfg.get<std::string>("detector_inputs");
    Pipeline pipe = load_pipeline(ckpt, det);
    InferenceResult inf = infer_records(pipe, test, !det.empty(), false);
    EvalReport rep = evaluate(test, inf.poses, skel, false);
    return std::pair<double, double>{rep.overall_mpjpe_mm, rep.pa_mpjpe_mm};
  };

  {
    std::ofstream tsv(fs::path(out) / "ablation_branches.tsv");
    tsv << "mode\tseed\tmpjpe_mm\tpa_mpjpe_mm\n";
    for (const std::string mode : cfg.get<std::vector<std::string>>("modes")) {
      double mean = 0.0;
      for (std::uint64_t sd : seeds) {
        std::string tag = mode + "_s" + std::to_string(sd);
        for (auto& c : tag)
          if (c == '+') c = '_';
        auto [mp, pa] = run_one(mode, cfg.get<int>("z_size"), cfg.get<int>("hm_size"), sd, tag);
        tsv << mode << "\t" << sd << "\t" << mp << "\t" << pa << "\n";
        mean += mp;
        std::printf("ablate %s seed %llu: mpjpe %.2f mm\n", mode.c_str(),
                    static_cast<unsigned long long>(sd), mp);
      }
      tsv << mode << "\tmean\t" << mean / static_cast<double>(seeds.size()) << "\t-\n";
    }
  }

  const auto z_grid = cfg.get<std::vector<int>>("z_grid");
  if (!z_grid.empty()) {
    std::ofstream tsv(fs::path(out) / "ablation_z.tsv");
    tsv << "z_size\tseed\tmpjpe_mm\tpa_mpjpe_mm\n";
    for (int z : z_grid)
      for (std::uint64_t sd : seeds) {
        auto [mp, pa] = run_one("p3d+hm+rot", z, cfg.get<int>("hm_size"), sd,
                                "z" + std::to_string(z) + "_s" + std::to_string(sd));
        tsv << z << "\t" << sd << "\t" << mp << "\t" << pa << "\n";
        std::printf("ablate z=%d seed %llu: mpjpe %.2f mm\n", z,
                    static_cast<unsigned long long>(sd), mp);
      }
  }

  const auto hm_grid = cfg.get<std::vector<int>>("hm_grid");
  if (!hm_grid.empty()) {
    std::ofstream tsv(fs::path(out) / "ablation_hm.tsv");
    tsv << "hm_size\tseed\tmpjpe_mm\tpa_mpjpe_mm\n";
    for (int hm : hm_grid)
      for (std::uint64_t sd : seeds) {
        auto [mp, pa] = run_one("p3d+hm+rot", cfg.get<int>("z_size"), hm, sd,
                                "hm" + std::to_string(hm) + "_s" + std::to_string(sd));
        tsv << hm << "\t" << sd << "\t" << mp << "\t" << pa << "\n";
        std::printf("ablate hm=%d seed %llu: mpjpe %.2f mm\n", hm,
                    static_cast<unsigned long long>(sd), mp);
      }
  }
  cfg.write_echo(out);
  return 0;
}

// ---------------------------------------------------------------------------
// animate
// ---------------------------------------------------------------------------

nlohmann::json animate_defaults() {
  return {{"seed", 0},           {"dataset", ""},      {"split", "test"},
          {"checkpoint", ""},    {"detector_checkpoint", ""},
          {"mode", "lifter"},    {"character_id", -1}, {"action", ""},
          {"max_frames", 0},     {"trace_joint", "RightFoot"}};
}

int cmd_animate(const RunConfig& cfg, const std::string& out) {
  const std::string dataset = cfg.get<std::string>("dataset");
  if (dataset.empty()) throw ConfigError("animate: dataset directory is required");
  Pipeline pipe = load_pipeline(cfg.get<std::string>("checkpoint"),
                                cfg.get<std::string>("detector_checkpoint"));
  if (!pipe.branches.rot)
    throw ConfigError("animate: the loaded checkpoint has no rotation branch");
  std::vector<SampleRecord> records = load_split(dataset, cfg.get<std::string>("split"));

  const auto clips = find_clips(records);
  const int want_char = cfg.get<int>("character_id");
  const std::string want_action = cfg.get<std::string>("action");
  const ClipView* chosen = nullptr;
  for (const auto& c : clips) {
    if (want_char >= 0 && c.character_id != static_cast<std::uint32_t>(want_char)) continue;
    if (!want_action.empty() && action_name(c.action) != want_action) continue;
    chosen = &c;
    break;
  }
  if (!chosen) throw ConfigError("animate: no clip matches the requested character/action");

  std::vector<SampleRecord> clip(records.begin() + static_cast<std::ptrdiff_t>(chosen->begin),
                                 records.begin() + static_cast<std::ptrdiff_t>(chosen->end));
  const int max_frames = cfg.get<int>("max_frames");
  if (max_frames > 0 && static_cast<int>(clip.size()) > max_frames)
    clip.resize(static_cast<std::size_t>(max_frames));
  for (const auto& r : clip)
    if (!r.has_3d) throw ConfigError("animate: clip contains records without 3D labels");

  const std::string mode = cfg.get<std::string>("mode");
  InferenceResult inf = infer_records(pipe, clip, mode == "end2end", true);

  std::vector<LocalRotations> gt_rot, pred_rot;
  std::vector<Vec3> gt_root, pred_root;
  for (std::size_t f = 0; f < clip.size(); ++f) {
    gt_rot.push_back(clip[f].rotations);
    gt_root.push_back(clip[f].pose3d.row(pipe.skel.root).transpose());
    pred_rot.push_back(inf.rotations[f]);
    pred_root.push_back(inf.poses[f].row(pipe.skel.root).transpose());
  }

  fs::create_directories(out);
  write_motion_json((fs::path(out) / "gt_motion.json").string(), pipe.skel, gt_rot, gt_root, 30.0);
  write_motion_json((fs::path(out) / "pred_motion.json").string(), pipe.skel, pred_rot,
                    pred_root, 30.0);
  write_bvh((fs::path(out) / "gt_motion.bvh").string(), pipe.skel, gt_rot, gt_root, 30.0);
  write_bvh((fs::path(out) / "pred_motion.bvh").string(), pipe.skel, pred_rot, pred_root, 30.0);

  const int joint = pipe.skel.index_of(cfg.get<std::string>("trace_joint"));
  RotationTrace trace = rotation_trace(gt_rot, pred_rot, joint);
  {
    std::ofstream tsv(fs::path(out) / "rotation_trace.tsv");
    tsv << "frame\tgt_angle_deg\tpred_angle_deg\terror_deg\n";
    for (std::size_t f = 0; f < trace.gt_angle.size(); ++f)
      tsv << f << "\t" << trace.gt_angle[f] * 180.0 / M_PI << "\t"
          << trace.pred_angle[f] * 180.0 / M_PI << "\t" << trace.error[f] * 180.0 / M_PI
          << "\n";
    nlohmann::json summary{{"joint", cfg.get<std::string>("trace_joint")},
                           {"frames", trace.gt_angle.size()},
                           {"gt_jitter_rad", trace.gt_jitter},
                           {"pred_jitter_rad", trace.pred_jitter}};
    std::ofstream js(fs::path(out) / "trace_summary.json");
    js << summary.dump(2) << "\n";
  }
  cfg.write_echo(out);
  std::printf("animated %zu frames of character %u (%s)\n", clip.size(), chosen->character_id,
              action_name(chosen->action));
  return 0;
}

// ---------------------------------------------------------------------------
// noise-sweep
// ---------------------------------------------------------------------------

nlohmann::json noise_defaults() {
  return {{"seed", 0},
          {"dataset", ""},
          {"split", "test"},
          {"checkpoint", ""},
          {"detector_checkpoint", ""},
          {"sigmas", {0.0, 0.05, 0.1, 0.2}},
          {"noise_seeds", {1, 2, 3}},
          {"root_relative", false},
          {"max_frames", 0}};
}

int cmd_noise_sweep(const RunConfig& cfg, const std::string& out) {
  const std::string dataset = cfg.get<std::string>("dataset");
  if (dataset.empty()) throw ConfigError("noise-sweep: dataset directory is required");
  Pipeline pipe = load_pipeline(cfg.get<std::string>("checkpoint"),
                                cfg.get<std::string>("detector_checkpoint"));
  std::vector<SampleRecord> records = load_split(dataset, cfg.get<std::string>("split"));
  const int max_frames = cfg.get<int>("max_frames");
  if (max_frames > 0 && static_cast<int>(records.size()) > max_frames)
    records.resize(static_cast<std::size_t>(max_frames));
  const auto rows = noise_sweep(pipe, records, pipe.skel, cfg.get<std::vector<double>>("sigmas"),
                                cfg.get<std::vector<std::uint64_t>>("noise_seeds"),
                                cfg.get<bool>("root_relative"));
  fs::create_directories(out);
  std::ofstream tsv(fs::path(out) / "noise_sweep.tsv");
  tsv << "sigma\tmean_mpjpe_mm\tstd_mpjpe_mm\n";
  for (const auto& r : rows) {
    tsv << r.sigma << "\t" << r.mean_mpjpe_mm << "\t" << r.std_mpjpe_mm << "\n";
    std::printf("sigma %.3f: %.3f mm (std %.3f)\n", r.sigma, r.mean_mpjpe_mm, r.std_mpjpe_mm);
  }
  cfg.write_echo(out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"egocentric 3D pose pipeline"};
  app.require_subcommand(1);

  CommonArgs gen_args, train_args, eval_args, ablate_args, animate_args, noise_args;
  CLI::App* c_gen = app.add_subcommand("generate", "generate a synthetic dataset");
  CLI::App* c_train = app.add_subcommand("train", "train a pipeline stage");
  CLI::App* c_eval = app.add_subcommand("eval", "evaluate a checkpoint");
  CLI::App* c_ablate = app.add_subcommand("ablate", "branch / size ablations");
  CLI::App* c_animate = app.add_subcommand("animate", "export predicted motion");
  CLI::App* c_noise = app.add_subcommand("noise-sweep", "robustness to image noise");
  add_common(c_gen, gen_args);
  add_common(c_train, train_args);
  add_common(c_eval, eval_args);
  add_common(c_ablate, ablate_args);
  add_common(c_animate, animate_args);
  add_common(c_noise, noise_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_gen->parsed()) return cmd_generate(resolve(generate_defaults(), gen_args), gen_args.out);
    if (c_train->parsed()) return cmd_train(resolve(train_defaults(), train_args), train_args.out);
    if (c_eval->parsed()) return cmd_eval(resolve(eval_defaults(), eval_args), eval_args.out);
    if (c_ablate->parsed())
      return cmd_ablate(resolve(ablate_defaults(), ablate_args), ablate_args.out);
    if (c_animate->parsed())
      return cmd_animate(resolve(animate_defaults(), animate_args), animate_args.out);
    if (c_noise->parsed())
      return cmd_noise_sweep(resolve(noise_defaults(), noise_args), noise_args.out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
