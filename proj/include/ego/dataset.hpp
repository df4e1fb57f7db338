#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ego/heatmap.hpp"
#include "ego/kinematics.hpp"

namespace ego {

// The nine motion categories carried as record labels.
enum class ActionLabel : std::uint8_t {
  kGaming = 0,
  kGesticulating,
  kGreeting,
  kLowerStretching,
  kPatting,
  kReacting,
  kTalking,
  kUpperStretching,
  kWalking,
};
constexpr int kNumActions = 9;

const char* action_name(ActionLabel a);
ActionLabel action_from_name(const std::string& name);

// One training/eval example. 2D joints are stored in heatmap coordinates;
// records without 3D labels carry no pose/rotation payload.
struct SampleRecord {
  std::uint32_t character_id = 0;
  std::uint32_t frame_id = 0;
  ActionLabel action = ActionLabel::kGaming;
  bool has_3d = true;
  Joints2D joints2d;
  Pose3D pose3d = Pose3D::Zero();
  LocalRotations rotations = LocalRotations::identity();
  std::vector<std::uint8_t> image;  // empty, or 368*368*3 RGB bytes
};

inline constexpr char kDatasetMagic[8] = {'E', 'G', 'O', 'D', 'A', 'T', 'A', '1'};

void write_dataset(const std::string& path, const std::vector<SampleRecord>& records);
std::vector<SampleRecord> read_dataset(const std::string& path);

// Sequences of frames belonging to one (character, action) run, in file
// order; used by animation export and rotation traces.
struct ClipView {
  std::uint32_t character_id;
  ActionLabel action;
  std::size_t begin;  // record index range [begin, end)
  std::size_t end;
};
std::vector<ClipView> find_clips(const std::vector<SampleRecord>& records);

}  // namespace ego
