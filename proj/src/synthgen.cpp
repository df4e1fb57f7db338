#include "ego/synthgen.hpp"

#include <filesystem>
#include <fstream>

namespace ego {

namespace {

struct ActionScale {
  double arms;
  double legs;
  double head;
};

ActionScale action_scale(ActionLabel a) {
  switch (a) {
    case ActionLabel::kGaming: return {0.80, 0.30, 0.8};
    case ActionLabel::kGesticulating: return {1.00, 0.10, 0.7};
    case ActionLabel::kGreeting: return {0.90, 0.15, 0.9};
    case ActionLabel::kLowerStretching: return {0.40, 1.00, 0.5};
    case ActionLabel::kPatting: return {0.70, 0.25, 0.6};
    case ActionLabel::kReacting: return {0.90, 0.50, 1.0};
    case ActionLabel::kTalking: return {0.40, 0.05, 0.6};
    case ActionLabel::kUpperStretching: return {1.00, 0.35, 0.8};
    case ActionLabel::kWalking: return {0.50, 0.80, 0.4};
  }
  return {1.0, 1.0, 1.0};
}

bool is_leg_joint(const std::string& name) {
  return name.find("Leg") != std::string::npos || name.find("Knee") != std::string::npos ||
         name.find("Foot") != std::string::npos || name.find("Toe") != std::string::npos;
}

bool is_arm_joint(const std::string& name) {
  return name.find("Arm") != std::string::npos || name.find("Elbow") != std::string::npos ||
         name.find("Hand") != std::string::npos;
}

// Length-L prefix of a clip covering L frames with the configured step count.
MotionClip make_clip(const Skeleton& skel, ActionLabel action, int length,
                     int steps_between, const Vec3& root_center, const Vec3& root_wander,
                     std::uint64_t seed) {
  const int seg = steps_between + 1;
  const int keyframes = std::max(2, (length - 2 + seg) / seg + 1);
  const AngleLimits limits = action_limits(skel, action);
  std::vector<LocalRotations> keys;
  std::vector<Vec3> roots;
  Rng root_rng = Rng::stream(seed, "clip-roots");
  for (int k = 0; k < keyframes; ++k) {
    keys.push_back(sample_pose(skel, limits, Rng::stream(seed, "clip-key", static_cast<std::uint64_t>(k)).next_u64()));
    Vec3 wander(root_rng.uniform(-root_wander.x(), root_wander.x()),
                root_rng.uniform(-root_wander.y(), root_wander.y()),
                root_rng.uniform(-root_wander.z(), root_wander.z()));
    roots.push_back(root_center + wander);
  }
  MotionClip clip = interpolate_clip(keys, roots, steps_between, 30.0, action);
  clip.rotations.resize(static_cast<std::size_t>(length));
  clip.root_positions.resize(static_cast<std::size_t>(length));
  return clip;
}

}  // namespace

AngleLimits action_limits(const Skeleton& skel, ActionLabel action) {
  AngleLimits lim = default_angle_limits(skel);
  const ActionScale s = action_scale(action);
  for (int j = 0; j < kNumJoints; ++j) {
    const std::string& name = skel.joint_names[static_cast<std::size_t>(j)];
    double scale = 1.0;
    if (is_arm_joint(name)) scale = s.arms;
    else if (is_leg_joint(name)) scale = s.legs;
    else if (name == "Head") scale = s.head;
    lim.max_angle[static_cast<std::size_t>(j)] *= scale;
  }
  return lim;
}

GenSummary generate_dataset(const std::string& out_dir, const GenConfig& config,
                            const Skeleton& skel, std::uint64_t seed) {
  namespace fs = std::filesystem;
  if (config.train_frames < 0 || config.val_frames < 0 || config.test_frames < 0)
    throw ConfigError("frame counts must be non-negative");
  if (config.twod_only_fraction < 0.0 || config.twod_only_fraction > 1.0)
    throw ConfigError("twod_only_fraction must be in [0,1]");
  config.camera.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) throw IoError("cannot create output dir: " + out_dir);

  struct Split {
    const char* name;
    int frames;
    int characters;
    std::uint32_t char_base;
    bool allow_2d_only;
  };
  const Split splits[3] = {
      {"train", config.train_frames, config.train_characters, 0, true},
      {"val", config.val_frames, config.val_characters, 1000, false},
      {"test", config.test_frames, config.test_characters, 2000, false},
  };

  GenSummary summary;
  nlohmann::json split_info;
  for (const Split& sp : splits) {
    std::vector<SampleRecord> records;
    std::array<int, kNumActions> per_action{};
    if (sp.frames > 0 && sp.characters > 0) {
      const int clips = sp.characters * kNumActions;
      const int base_len = sp.frames / clips;
      const int remainder = sp.frames % clips;
      int clip_index = 0;
      for (int c = 0; c < sp.characters; ++c) {
        const std::uint32_t char_id = sp.char_base + static_cast<std::uint32_t>(c);
        std::uint32_t frame_id = 0;
        for (int a = 0; a < kNumActions; ++a, ++clip_index) {
          const int length = base_len + (clip_index < remainder ? 1 : 0);
          if (length == 0) continue;
          const ActionLabel action = static_cast<ActionLabel>(a);
          const std::uint64_t clip_seed =
              Rng::stream(seed, "clip", char_id, static_cast<std::uint64_t>(a)).next_u64();
          MotionClip clip = make_clip(skel, action, length, config.steps_between,
                                      config.root_center, config.root_wander, clip_seed);
          const FisheyeCamera cam = jitter_mount(config.camera, clip_seed,
                                                 config.jitter_trans_sigma,
                                                 config.jitter_rot_sigma);
          const double hm_scale = to_heatmap_scale();
          for (std::size_t f = 0; f < clip.rotations.size(); ++f, ++frame_id) {
            SampleRecord r;
            r.character_id = char_id;
            r.frame_id = frame_id;
            r.action = action;
            // fold the mount transform into the stored root so that
            // FK(rotations) reproduces the camera-frame pose exactly
            LocalRotations rot = clip.rotations[f];
            rot.q[static_cast<std::size_t>(skel.root)] = canonical(
                cam.mount_rotation * rot.q[static_cast<std::size_t>(skel.root)]);
            const Vec3 root_cam = to_camera(cam, clip.root_positions[f]);
            const Pose3D pose = forward_kinematics(rot, skel, root_cam);
            r.pose3d = pose;
            r.rotations = rot;
            for (int j = 0; j < kNumJoints; ++j) {
              const int ch = skel.heatmap_channel(j);
              if (ch < 0) continue;
              const Projection pr = project(cam, pose.row(j).transpose());
              r.joints2d.uv(ch, 0) = pr.pixel.x() * hm_scale;
              r.joints2d.uv(ch, 1) = pr.pixel.y() * hm_scale;
              r.joints2d.visible[static_cast<std::size_t>(ch)] = pr.visible;
            }
            if (config.images) {
              const Image img = rasterize(pose, skel, cam, config.style,
                                          Rng::stream(clip_seed, "img", f).next_u64());
              r.image = img.rgb;
            }
            if (sp.allow_2d_only && config.twod_only_fraction > 0.0) {
              Rng mask = Rng::stream(seed, "mask2d", char_id, frame_id);
              if (mask.uniform() < config.twod_only_fraction) {
                r.has_3d = false;
                r.pose3d.setZero();
                r.rotations = LocalRotations::identity();
              }
            }
            per_action[static_cast<std::size_t>(a)] += 1;
            records.push_back(std::move(r));
          }
        }
      }
    }
    write_dataset((fs::path(out_dir) / (std::string(sp.name) + ".egodata")).string(), records);
    nlohmann::json actions;
    for (int a = 0; a < kNumActions; ++a)
      actions[action_name(static_cast<ActionLabel>(a))] = per_action[static_cast<std::size_t>(a)];
    split_info[sp.name] = {{"frames", records.size()},
                           {"characters", sp.characters},
                           {"character_base", sp.char_base},
                           {"per_action", actions}};
    summary.total_records += static_cast<int>(records.size());
  }

  save_skeleton((fs::path(out_dir) / "skeleton.json").string(), skel);

  nlohmann::json manifest;
  manifest["format"] = std::string(kDatasetMagic, 8);
  manifest["seed"] = seed;
  manifest["fps"] = 30;
  manifest["splits"] = split_info;
  manifest["skeleton_file"] = "skeleton.json";
  manifest["camera"] = {{"focal", config.camera.focal},
                        {"principal_point", {config.camera.principal_point.x(),
                                             config.camera.principal_point.y()}},
                        {"width", config.camera.width},
                        {"height", config.camera.height},
                        {"fov", config.camera.fov}};
  manifest["images"] = config.images;
  manifest["twod_only_fraction"] = config.twod_only_fraction;
  std::ofstream mf(fs::path(out_dir) / "manifest.json");
  if (!mf) throw IoError("cannot write manifest in " + out_dir);
  mf << manifest.dump(2) << "\n";
  summary.manifest = manifest;
  return summary;
}

}  // namespace ego
