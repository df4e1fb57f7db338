#include "ego/runconfig.hpp"

#include <filesystem>
#include <fstream>

#include "ego/common.hpp"

namespace ego {

namespace {

std::vector<std::string> split_path(const std::string& dotted) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : dotted) {
    if (c == '.') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  return parts;
}

void collect_paths(const nlohmann::json& j, const std::string& prefix,
                   std::vector<std::string>& out) {
  if (!j.is_object()) {
    out.push_back(prefix);
    return;
  }
  for (const auto& [key, value] : j.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object())
      collect_paths(value, path, out);
    else
      out.push_back(path);
  }
}

void deep_merge(nlohmann::json& base, const nlohmann::json& patch) {
  if (!patch.is_object() || !base.is_object()) {
    base = patch;
    return;
  }
  for (const auto& [key, value] : patch.items()) {
    if (base.contains(key) && base[key].is_object() && value.is_object())
      deep_merge(base[key], value);
    else
      base[key] = value;
  }
}

}  // namespace

RunConfig::RunConfig(nlohmann::json defaults, std::vector<std::string> allowed_paths)
    : values_(std::move(defaults)), allowed_(std::move(allowed_paths)) {
  // defaults define the schema as well
  std::vector<std::string> base;
  collect_paths(values_, "", base);
  for (auto& p : base) allowed_.push_back(p);
}

void RunConfig::merge_file(const std::string& path) {
  if (path.empty()) return;
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file: " + path);
  nlohmann::json patch;
  try {
    f >> patch;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed config file " + path + ": " + e.what());
  }
  if (!patch.is_object()) throw ConfigError("config file must hold a JSON object");
  deep_merge(values_, patch);
}

void RunConfig::apply_override(const std::string& key_eq_value) {
  const auto eq = key_eq_value.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override must look like key=value: " + key_eq_value);
  const std::string key = key_eq_value.substr(0, eq);
  const std::string raw = key_eq_value.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;  // plain string
  set(key, std::move(value));
}

void RunConfig::set(const std::string& dotted, nlohmann::json value) {
  nlohmann::json* cur = &values_;
  for (const std::string& part : split_path(dotted)) {
    if (part.empty()) throw ConfigError("bad config path: " + dotted);
    cur = &(*cur)[part];
  }
  *cur = std::move(value);
}

nlohmann::json RunConfig::at(const std::string& dotted) const {
  const nlohmann::json* cur = &values_;
  for (const std::string& part : split_path(dotted)) {
    if (!cur->is_object() || !cur->contains(part))
      throw ConfigError("missing config key: " + dotted);
    cur = &(*cur)[part];
  }
  return *cur;
}

bool RunConfig::has(const std::string& dotted) const {
  const nlohmann::json* cur = &values_;
  for (const std::string& part : split_path(dotted)) {
    if (!cur->is_object() || !cur->contains(part)) return false;
    cur = &(*cur)[part];
  }
  return true;
}

void RunConfig::validate() const {
  std::vector<std::string> present;
  collect_paths(values_, "", present);
  for (const std::string& p : present) {
    bool ok = false;
    for (const std::string& a : allowed_)
      if (a == p) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError("unknown config key: " + p);
  }
}

std::string RunConfig::hash_of(const nlohmann::json& j) {
  const std::string dump = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string RunConfig::hash() const { return hash_of(values_); }

void RunConfig::write_echo(const std::string& out_dir) const {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  std::ofstream f(fs::path(out_dir) / "resolved_config.json");
  if (!f) throw IoError("cannot write resolved config in " + out_dir);
  f << values_.dump(2) << "\n";
}

}  // namespace ego
