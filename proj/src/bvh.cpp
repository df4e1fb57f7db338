#include "ego/bvh.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace ego {

namespace {

constexpr double kRad2Deg = 180.0 / M_PI;
constexpr double kDeg2Rad = M_PI / 180.0;

std::vector<std::vector<int>> children_of(const Skeleton& skel) {
  std::vector<std::vector<int>> ch(kNumJoints);
  for (int j = 0; j < kNumJoints; ++j) {
    const int p = skel.parent[static_cast<std::size_t>(j)];
    if (p >= 0) ch[static_cast<std::size_t>(p)].push_back(j);
  }
  return ch;
}

void write_joint(std::ostream& os, const Skeleton& skel,
                 const std::vector<std::vector<int>>& children, int joint, int depth,
                 std::vector<int>& channel_order) {
  const std::string pad(static_cast<std::size_t>(depth) * 2, ' ');
  const std::string& name = skel.joint_names[static_cast<std::size_t>(joint)];
  const Vec3& off = skel.rest_offset[static_cast<std::size_t>(joint)];
  // rotation holder with zero offset, then the offset node
  os << pad << "JOINT " << name << "_rot\n" << pad << "{\n";
  os << pad << "  OFFSET 0 0 0\n";
  os << pad << "  CHANNELS 3 Zrotation Xrotation Yrotation\n";
  channel_order.push_back(joint);
  os << pad << "  JOINT " << name << "\n" << pad << "  {\n";
  os << pad << "    OFFSET " << off.x() << " " << off.y() << " " << off.z() << "\n";
  os << pad << "    CHANNELS 3 Zrotation Xrotation Yrotation\n";
  channel_order.push_back(-1);  // identity channels on the offset node
  if (children[static_cast<std::size_t>(joint)].empty()) {
    os << pad << "    End Site\n" << pad << "    {\n";
    os << pad << "      OFFSET 0 0 0\n" << pad << "    }\n";
  } else {
    for (int c : children[static_cast<std::size_t>(joint)])
      write_joint(os, skel, children, c, depth + 2, channel_order);
  }
  os << pad << "  }\n" << pad << "}\n";
}

}  // namespace

Vec3 quat_to_euler_zxy(const Quat& q) {
  const Eigen::Matrix3d m = q.normalized().toRotationMatrix();
  // R = Rz Rx Ry: m(2,1) = sin(x)
  const double sx = std::clamp(m(2, 1), -1.0, 1.0);
  const double x = std::asin(sx);
  if (std::abs(sx) > 1.0 - 1e-9) {
    // gimbal: y set to zero, z absorbs the remaining rotation
    const double z = std::atan2(m(1, 0), m(0, 0));
    return Vec3(z, x, 0.0);
  }
  const double z = std::atan2(-m(0, 1), m(1, 1));
  const double y = std::atan2(-m(2, 0), m(2, 2));
  return Vec3(z, x, y);
}

Quat euler_zxy_to_quat(const Vec3& zxy) {
  const Quat qz = axis_angle(Vec3(0, 0, 1), zxy[0]);
  const Quat qx = axis_angle(Vec3(1, 0, 0), zxy[1]);
  const Quat qy = axis_angle(Vec3(0, 1, 0), zxy[2]);
  return canonical(qz * qx * qy);
}

void write_bvh(const std::string& path, const Skeleton& skel,
               const std::vector<LocalRotations>& rotations,
               const std::vector<Vec3>& root_positions, double fps) {
  if (rotations.size() != root_positions.size())
    throw DimensionError("bvh: rotation/root frame count mismatch");
  std::ofstream os(path);
  if (!os) throw IoError("cannot write motion file: " + path);
  os << std::setprecision(9);

  const auto children = children_of(skel);
  std::vector<int> channel_order;  // joint whose rotation each 3-channel group holds
  os << "HIERARCHY\n";
  os << "ROOT " << skel.joint_names[static_cast<std::size_t>(skel.root)] << "\n{\n";
  os << "  OFFSET 0 0 0\n";
  os << "  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation\n";
  channel_order.push_back(skel.root);
  for (int c : children[static_cast<std::size_t>(skel.root)])
    write_joint(os, skel, children, c, 1, channel_order);
  os << "}\n";

  os << "MOTION\n";
  os << "Frames: " << rotations.size() << "\n";
  os << "Frame Time: " << 1.0 / fps << "\n";
  for (std::size_t f = 0; f < rotations.size(); ++f) {
    std::ostringstream line;
    line << std::setprecision(9);
    const Vec3& rp = root_positions[f];
    line << rp.x() << " " << rp.y() << " " << rp.z();
    bool first = true;
    for (int joint : channel_order) {
      if (first) {  // the root's own rotation shares its channel group
        const Vec3 e = quat_to_euler_zxy(rotations[f].q[static_cast<std::size_t>(skel.root)]);
        line << " " << e[0] * kRad2Deg << " " << e[1] * kRad2Deg << " " << e[2] * kRad2Deg;
        first = false;
        continue;
      }
      if (joint < 0) {
        line << " 0 0 0";
        continue;
      }
      const Vec3 e = quat_to_euler_zxy(rotations[f].q[static_cast<std::size_t>(joint)]);
      line << " " << e[0] * kRad2Deg << " " << e[1] * kRad2Deg << " " << e[2] * kRad2Deg;
    }
    os << line.str() << "\n";
  }
}

BvhClip read_bvh(const std::string& path, const Skeleton& skel) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open motion file: " + path);
  std::vector<std::string> tokens;
  std::string tok;
  while (is >> tok) tokens.push_back(tok);

  // hierarchy pass: recover the channel order (joint index per 3-channel
  // rotation group, -1 for identity groups on offset nodes)
  std::vector<int> channel_order;
  std::size_t i = 0;
  auto expect = [&](const char* want) {
    if (i >= tokens.size() || tokens[i] != want)
      throw IoError("motion file parse error near token " + std::to_string(i));
    ++i;
  };
  expect("HIERARCHY");
  std::size_t motion_at = tokens.size();
  for (std::size_t k = i; k < tokens.size(); ++k)
    if (tokens[k] == "MOTION") {
      motion_at = k;
      break;
    }
  for (std::size_t k = i; k < motion_at; ++k) {
    if (tokens[k] == "ROOT" || tokens[k] == "JOINT") {
      const std::string name = tokens[k + 1];
      if (name.size() > 4 && name.substr(name.size() - 4) == "_rot")
        channel_order.push_back(skel.index_of(name.substr(0, name.size() - 4)));
      else if (tokens[k] == "ROOT")
        channel_order.push_back(skel.root);
      else
        channel_order.push_back(-1);
    }
  }
  i = motion_at;
  expect("MOTION");
  expect("Frames:");
  const int frames = std::stoi(tokens[i++]);
  expect("Frame");
  expect("Time:");
  const double frame_time = std::stod(tokens[i++]);

  BvhClip clip;
  clip.fps = 1.0 / frame_time;
  for (int f = 0; f < frames; ++f) {
    LocalRotations rot = LocalRotations::identity();
    Vec3 root;
    for (int k = 0; k < 3; ++k) root[k] = std::stod(tokens[i++]);
    for (int joint : channel_order) {
      Vec3 e;
      for (int k = 0; k < 3; ++k) e[k] = std::stod(tokens[i++]) * kDeg2Rad;
      if (joint >= 0) rot.q[static_cast<std::size_t>(joint)] = euler_zxy_to_quat(e);
    }
    clip.rotations.push_back(rot);
    clip.root_positions.push_back(root);
  }
  return clip;
}

void write_motion_json(const std::string& path, const Skeleton& skel,
                       const std::vector<LocalRotations>& rotations,
                       const std::vector<Vec3>& root_positions, double fps) {
  if (rotations.size() != root_positions.size())
    throw DimensionError("motion json: frame count mismatch");
  nlohmann::json j;
  j["fps"] = fps;
  for (int k = 0; k < kNumJoints; ++k)
    j["joints"].push_back(skel.joint_names[static_cast<std::size_t>(k)]);
  for (std::size_t f = 0; f < rotations.size(); ++f) {
    nlohmann::json frame;
    frame["root"] = {root_positions[f].x(), root_positions[f].y(), root_positions[f].z()};
    for (int k = 0; k < kNumJoints; ++k) {
      const Quat& q = rotations[f].q[static_cast<std::size_t>(k)];
      frame["quats"].push_back({q.w(), q.x(), q.y(), q.z()});
    }
    j["frames"].push_back(frame);
  }
  std::ofstream os(path);
  if (!os) throw IoError("cannot write motion json: " + path);
  os << j.dump() << "\n";
}

BvhClip read_motion_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open motion json: " + path);
  nlohmann::json j;
  is >> j;
  BvhClip clip;
  clip.fps = j.at("fps");
  for (const auto& frame : j.at("frames")) {
    Vec3 root(frame.at("root")[0], frame.at("root")[1], frame.at("root")[2]);
    LocalRotations rot;
    for (int k = 0; k < kNumJoints; ++k) {
      const auto& q = frame.at("quats")[static_cast<std::size_t>(k)];
      rot.q[static_cast<std::size_t>(k)] = Quat(q[0], q[1], q[2], q[3]);
    }
    clip.rotations.push_back(rot);
    clip.root_positions.push_back(root);
  }
  return clip;
}

}  // namespace ego
