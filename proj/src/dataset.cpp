#include "ego/dataset.hpp"

#include <cstring>
#include <fstream>

namespace ego {

namespace {

constexpr const char* kActionNames[kNumActions] = {
    "Gaming",   "Gesticulating",   "Greeting", "LowerStretching", "Patting",
    "Reacting", "Talking",         "UpperStretching", "Walking"};

template <typename T>
void put(std::string& buf, const T& v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(const std::string& buf, std::size_t& off) {
  if (off + sizeof(T) > buf.size()) throw IoError("dataset file truncated");
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

}  // namespace

const char* action_name(ActionLabel a) {
  return kActionNames[static_cast<std::uint8_t>(a)];
}

ActionLabel action_from_name(const std::string& name) {
  for (int i = 0; i < kNumActions; ++i)
    if (name == kActionNames[i]) return static_cast<ActionLabel>(i);
  throw ConfigError("unknown action label: " + name);
}

void write_dataset(const std::string& path, const std::vector<SampleRecord>& records) {
  std::string buf;
  buf.append(kDatasetMagic, 8);
  put<std::uint32_t>(buf, 1);  // version
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    put<std::uint32_t>(buf, r.character_id);
    put<std::uint32_t>(buf, r.frame_id);
    put<std::uint8_t>(buf, static_cast<std::uint8_t>(r.action));
    put<std::uint8_t>(buf, r.has_3d ? 1 : 0);
    std::uint16_t vis = 0;
    for (int c = 0; c < kNumHeatmapJoints; ++c)
      if (r.joints2d.visible[static_cast<std::size_t>(c)]) vis |= static_cast<std::uint16_t>(1u << c);
    put<std::uint16_t>(buf, vis);
    for (int c = 0; c < kNumHeatmapJoints; ++c) {
      put<float>(buf, static_cast<float>(r.joints2d.uv(c, 0)));
      put<float>(buf, static_cast<float>(r.joints2d.uv(c, 1)));
    }
    if (r.has_3d) {
      for (int j = 0; j < kNumJoints; ++j)
        for (int k = 0; k < 3; ++k) put<float>(buf, static_cast<float>(r.pose3d(j, k)));
      for (int j = 0; j < kNumJoints; ++j) {
        const Quat& q = r.rotations.q[static_cast<std::size_t>(j)];
        put<float>(buf, static_cast<float>(q.w()));
        put<float>(buf, static_cast<float>(q.x()));
        put<float>(buf, static_cast<float>(q.y()));
        put<float>(buf, static_cast<float>(q.z()));
      }
    }
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(r.image.size()));
    buf.append(reinterpret_cast<const char*>(r.image.data()),
               static_cast<std::size_t>(r.image.size()));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write dataset: " + path);
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw IoError("dataset write failed: " + path);
}

std::vector<SampleRecord> read_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open dataset: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (buf.size() < 16 || std::memcmp(buf.data(), kDatasetMagic, 8) != 0)
    throw IoError("bad dataset magic in " + path);
  std::size_t off = 8;
  const auto version = take<std::uint32_t>(buf, off);
  if (version != 1) throw IoError("unsupported dataset version in " + path);
  const auto count = take<std::uint32_t>(buf, off);
  std::vector<SampleRecord> records;
  records.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    SampleRecord r;
    r.character_id = take<std::uint32_t>(buf, off);
    r.frame_id = take<std::uint32_t>(buf, off);
    const auto action = take<std::uint8_t>(buf, off);
    if (action >= kNumActions) throw IoError("bad action label in record");
    r.action = static_cast<ActionLabel>(action);
    r.has_3d = take<std::uint8_t>(buf, off) != 0;
    const auto vis = take<std::uint16_t>(buf, off);
    for (int c = 0; c < kNumHeatmapJoints; ++c)
      r.joints2d.visible[static_cast<std::size_t>(c)] = (vis >> c) & 1u;
    for (int c = 0; c < kNumHeatmapJoints; ++c) {
      r.joints2d.uv(c, 0) = take<float>(buf, off);
      r.joints2d.uv(c, 1) = take<float>(buf, off);
    }
    if (r.has_3d) {
      for (int j = 0; j < kNumJoints; ++j)
        for (int k = 0; k < 3; ++k) r.pose3d(j, k) = take<float>(buf, off);
      for (int j = 0; j < kNumJoints; ++j) {
        const float w = take<float>(buf, off);
        const float x = take<float>(buf, off);
        const float y = take<float>(buf, off);
        const float z = take<float>(buf, off);
        r.rotations.q[static_cast<std::size_t>(j)] = Quat(w, x, y, z);
      }
    }
    const auto ilen = take<std::uint32_t>(buf, off);
    if (ilen != 0) {
      if (off + ilen > buf.size()) throw IoError("dataset file truncated (image)");
      r.image.assign(buf.begin() + static_cast<std::ptrdiff_t>(off),
                     buf.begin() + static_cast<std::ptrdiff_t>(off + ilen));
      off += ilen;
    }
    records.push_back(std::move(r));
  }
  if (off != buf.size()) throw IoError("trailing bytes in dataset " + path);
  return records;
}

std::vector<ClipView> find_clips(const std::vector<SampleRecord>& records) {
  std::vector<ClipView> clips;
  for (std::size_t i = 0; i < records.size();) {
    std::size_t j = i + 1;
    while (j < records.size() && records[j].character_id == records[i].character_id &&
           records[j].action == records[i].action &&
           records[j].frame_id == records[j - 1].frame_id + 1)
      ++j;
    clips.push_back({records[i].character_id, records[i].action, i, j});
    i = j;
  }
  return clips;
}

}  // namespace ego
