#include "ego/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

namespace ego {

LocalRotations LocalRotations::identity() {
  LocalRotations r;
  r.q.fill(Quat::Identity());
  return r;
}

Quat canonical(const Quat& q) {
  Quat n = q.normalized();
  const double* c = n.coeffs().data();  // x,y,z,w
  bool flip = n.w() < 0.0;
  if (n.w() == 0.0) {
    for (int i = 0; i < 3; ++i) {
      if (c[i] != 0.0) {
        flip = c[i] < 0.0;
        break;
      }
    }
  }
  return flip ? Quat(-n.w(), -n.x(), -n.y(), -n.z()) : n;
}

bool is_canonical_unit(const Quat& q, double tol) {
  return std::abs(q.norm() - 1.0) < tol && q.w() >= -tol;
}

Quat quat_mul(const Quat& a, const Quat& b) { return canonical(a * b); }

Quat quat_from_two_vectors(const Vec3& u, const Vec3& v) {
  const double nu = u.norm(), nv = v.norm();
  if (nu < 1e-12 || nv < 1e-12)
    throw NumericError("quat_from_two_vectors: zero-length input");
  const Vec3 un = u / nu, vn = v / nv;
  const double c = un.dot(vn);
  const Vec3 cr = un.cross(vn);
  const double s = cr.norm();
  if (s < 1e-12) {
    if (c > 0.0) return Quat::Identity();
    // Anti-parallel: 180 degrees about a perpendicular axis; pick the
    // smallest-magnitude component of u to build it deterministically.
    int k = 0;
    for (int i = 1; i < 3; ++i)
      if (std::abs(un[i]) < std::abs(un[k])) k = i;
    Vec3 e = Vec3::Zero();
    e[k] = 1.0;
    const Vec3 axis = un.cross(e).normalized();
    return canonical(Quat(0.0, axis.x(), axis.y(), axis.z()));
  }
  const double angle = std::atan2(s, c);
  return axis_angle(cr / s, angle);
}

double quat_angle(const Quat& q) {
  const Quat n = canonical(q);
  const double w = std::min(1.0, std::max(-1.0, n.w()));
  return 2.0 * std::acos(w);
}

Quat slerp(const Quat& a, const Quat& b, double t) {
  Quat an = a.normalized();
  Quat bn = b.normalized();
  double d = an.dot(bn);
  if (d < 0.0) {  // take the short arc
    bn.coeffs() = -bn.coeffs();
    d = -d;
  }
  if (d > 1.0 - 1e-12) {  // nearly identical: nlerp
    Quat out;
    out.coeffs() = (1.0 - t) * an.coeffs() + t * bn.coeffs();
    out.normalize();
    return out;
  }
  const double theta = std::acos(d);
  const double sin_theta = std::sin(theta);
  const double wa = std::sin((1.0 - t) * theta) / sin_theta;
  const double wb = std::sin(t * theta) / sin_theta;
  Quat out;
  out.coeffs() = wa * an.coeffs() + wb * bn.coeffs();
  out.normalize();
  return out;
}

Quat axis_angle(const Vec3& axis, double angle) {
  const Vec3 a = axis.normalized();
  const double h = 0.5 * angle;
  const double s = std::sin(h);
  return canonical(Quat(std::cos(h), s * a.x(), s * a.y(), s * a.z()));
}

int Skeleton::index_of(const std::string& name) const {
  for (int i = 0; i < kNumJoints; ++i)
    if (joint_names[static_cast<std::size_t>(i)] == name) return i;
  throw ConfigError("unknown joint name: " + name);
}

int Skeleton::heatmap_channel(int joint) const {
  for (int c = 0; c < kNumHeatmapJoints; ++c)
    if (heatmap_joints[static_cast<std::size_t>(c)] == joint) return c;
  return -1;
}

void Skeleton::validate() const {
  int roots = 0;
  for (int j = 0; j < kNumJoints; ++j) {
    const int p = parent[static_cast<std::size_t>(j)];
    if (p == -1 || p == j) {
      ++roots;
      if (j != root) throw ConfigError("skeleton root mismatch");
      continue;
    }
    if (p < 0 || p >= kNumJoints) throw ConfigError("skeleton parent index out of range");
    if (rest_offset[static_cast<std::size_t>(j)].norm() <= 0.0)
      throw ConfigError("skeleton rest offset must have positive length at " +
                        joint_names[static_cast<std::size_t>(j)]);
  }
  if (roots != 1) throw ConfigError("skeleton must have exactly one root");
  // cycle check: every joint must reach the root
  for (int j = 0; j < kNumJoints; ++j) {
    int cur = j, hops = 0;
    while (cur != root) {
      cur = parent[static_cast<std::size_t>(cur)];
      if (cur < 0 || ++hops > kNumJoints) throw ConfigError("skeleton parent graph is not a tree");
    }
  }
  const int head = index_of("Head");
  std::set<int> hm(heatmap_joints.begin(), heatmap_joints.end());
  if (hm.size() != kNumHeatmapJoints || hm.count(head))
    throw ConfigError("heatmap joints must cover every joint except the head");
  if (topo_order.size() != kNumJoints) throw ConfigError("skeleton topo order not built");
  std::vector<bool> seen(kNumJoints, false);
  for (int j : topo_order) {
    const int p = parent[static_cast<std::size_t>(j)];
    if (p >= 0 && !seen[static_cast<std::size_t>(p)])
      throw ConfigError("skeleton topo order lists a child before its parent");
    seen[static_cast<std::size_t>(j)] = true;
  }
}

namespace {

void build_topo(Skeleton& s) {
  s.topo_order.clear();
  s.topo_order.push_back(s.root);
  std::vector<bool> placed(kNumJoints, false);
  placed[static_cast<std::size_t>(s.root)] = true;
  while (s.topo_order.size() < kNumJoints) {
    bool progress = false;
    for (int j = 0; j < kNumJoints; ++j) {
      if (placed[static_cast<std::size_t>(j)]) continue;
      const int p = s.parent[static_cast<std::size_t>(j)];
      if (p >= 0 && placed[static_cast<std::size_t>(p)]) {
        s.topo_order.push_back(j);
        placed[static_cast<std::size_t>(j)] = true;
        progress = true;
      }
    }
    if (!progress) throw ConfigError("skeleton parent graph is not a tree");
  }
}

void fill_heatmap_joints(Skeleton& s) {
  const int head = s.index_of("Head");
  int c = 0;
  for (int j = 0; j < kNumJoints; ++j)
    if (j != head) s.heatmap_joints[static_cast<std::size_t>(c++)] = j;
}

}  // namespace

Skeleton default_skeleton() {
  Skeleton s;
  // name, parent name ("" for root), offset from parent (meters)
  const struct {
    const char* name;
    const char* parent;
    double x, y, z;
  } table[kNumJoints] = {
      {"Neck", "", 0.0, 0.0, 0.0},
      {"Head", "Neck", 0.0, -0.01, -0.21},
      {"LeftArm", "Neck", 0.17, 0.0, 0.05},
      {"LeftElbow", "LeftArm", 0.10, 0.0, 0.27},
      {"LeftHand", "LeftElbow", 0.05, 0.02, 0.25},
      {"RightArm", "Neck", -0.17, 0.0, 0.05},
      {"RightElbow", "RightArm", -0.10, 0.0, 0.27},
      {"RightHand", "RightElbow", -0.05, 0.02, 0.25},
      {"LeftLeg", "Neck", 0.095, 0.0, 0.53},
      {"LeftKnee", "LeftLeg", 0.01, 0.0, 0.42},
      {"LeftFoot", "LeftKnee", 0.0, -0.01, 0.41},
      {"LeftToe", "LeftFoot", 0.0, 0.14, 0.06},
      {"RightLeg", "Neck", -0.095, 0.0, 0.53},
      {"RightKnee", "RightLeg", -0.01, 0.0, 0.42},
      {"RightFoot", "RightKnee", 0.0, -0.01, 0.41},
      {"RightToe", "RightFoot", 0.0, 0.14, 0.06},
  };
  for (int j = 0; j < kNumJoints; ++j) {
    s.joint_names[static_cast<std::size_t>(j)] = table[j].name;
    s.rest_offset[static_cast<std::size_t>(j)] = Vec3(table[j].x, table[j].y, table[j].z);
  }
  for (int j = 0; j < kNumJoints; ++j) {
    const std::string p = table[j].parent;
    s.parent[static_cast<std::size_t>(j)] = p.empty() ? -1 : s.index_of(p);
  }
  s.root = 0;
  build_topo(s);
  fill_heatmap_joints(s);
  s.validate();
  return s;
}

Skeleton load_skeleton(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open skeleton file: " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return skeleton_from_json(text);
}

Skeleton skeleton_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  const auto& joints = j.at("joints");
  if (joints.size() != kNumJoints)
    throw ConfigError("skeleton file must define exactly 16 joints");
  Skeleton s;
  for (int i = 0; i < kNumJoints; ++i)
    s.joint_names[static_cast<std::size_t>(i)] = joints[static_cast<std::size_t>(i)].at("name");
  for (int i = 0; i < kNumJoints; ++i) {
    const auto& jj = joints[static_cast<std::size_t>(i)];
    const std::string p = jj.value("parent", "");
    s.parent[static_cast<std::size_t>(i)] = p.empty() ? -1 : s.index_of(p);
    const auto off = jj.at("offset");
    s.rest_offset[static_cast<std::size_t>(i)] = Vec3(off[0], off[1], off[2]);
    if (s.parent[static_cast<std::size_t>(i)] == -1) s.root = i;
  }
  build_topo(s);
  fill_heatmap_joints(s);
  s.validate();
  return s;
}

std::string skeleton_to_json(const Skeleton& skel) {
  nlohmann::json joints = nlohmann::json::array();
  for (int i = 0; i < kNumJoints; ++i) {
    const int p = skel.parent[static_cast<std::size_t>(i)];
    const Vec3& o = skel.rest_offset[static_cast<std::size_t>(i)];
    joints.push_back({{"name", skel.joint_names[static_cast<std::size_t>(i)]},
                      {"parent", p < 0 ? "" : skel.joint_names[static_cast<std::size_t>(p)]},
                      {"offset", {o.x(), o.y(), o.z()}}});
  }
  return nlohmann::json{{"joints", joints}}.dump(2);
}

void save_skeleton(const std::string& path, const Skeleton& skel) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write skeleton file: " + path);
  f << skeleton_to_json(skel) << "\n";
}

Pose3D forward_kinematics(const LocalRotations& rot, const Skeleton& skel,
                          const Vec3& root_pos) {
  std::array<Quat, kNumJoints> global;
  Pose3D pose;
  for (int j : skel.topo_order) {
    const int p = skel.parent[static_cast<std::size_t>(j)];
    if (p < 0) {
      global[static_cast<std::size_t>(j)] = rot.q[static_cast<std::size_t>(j)].normalized();
      pose.row(j) = root_pos.transpose();
      continue;
    }
    global[static_cast<std::size_t>(j)] =
        (global[static_cast<std::size_t>(p)] * rot.q[static_cast<std::size_t>(j)]).normalized();
    const Vec3 limb =
        global[static_cast<std::size_t>(j)] * skel.rest_offset[static_cast<std::size_t>(j)];
    pose.row(j) = pose.row(p) + limb.transpose();
  }
  return pose;
}

LocalRotations extract_rotations(const Pose3D& pose, const Skeleton& skel) {
  std::array<Quat, kNumJoints> global;
  LocalRotations out;
  for (int j : skel.topo_order) {
    const int p = skel.parent[static_cast<std::size_t>(j)];
    if (p < 0) {
      out.q[static_cast<std::size_t>(j)] = Quat::Identity();
      global[static_cast<std::size_t>(j)] = Quat::Identity();
      continue;
    }
    const Vec3 bone = (pose.row(j) - pose.row(p)).transpose();
    if (bone.norm() < 1e-9)
      throw NumericError("extract_rotations: zero-length bone at " +
                         skel.joint_names[static_cast<std::size_t>(j)]);
    // observed direction in the parent's frame
    const Vec3 local = global[static_cast<std::size_t>(p)].conjugate() * bone;
    out.q[static_cast<std::size_t>(j)] =
        quat_from_two_vectors(skel.rest_offset[static_cast<std::size_t>(j)], local);
    global[static_cast<std::size_t>(j)] =
        (global[static_cast<std::size_t>(p)] * out.q[static_cast<std::size_t>(j)]).normalized();
  }
  return out;
}

std::array<Vec3, kNumBones> limb_vectors(const Pose3D& pose, const Skeleton& skel) {
  std::array<Vec3, kNumBones> limbs;
  int idx = 0;
  for (int j = 0; j < kNumJoints; ++j) {
    const int p = skel.parent[static_cast<std::size_t>(j)];
    if (p < 0) continue;
    limbs[static_cast<std::size_t>(idx++)] = (pose.row(j) - pose.row(p)).transpose();
  }
  return limbs;
}

}  // namespace ego
