#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace ego {

// Structured-text run configuration: defaults, optional config file, then
// command-line overrides. Unknown keys are rejected against the command's
// allowed key list; every run writes the resolved values next to its outputs.
class RunConfig {
 public:
  RunConfig(nlohmann::json defaults, std::vector<std::string> allowed_paths);

  void merge_file(const std::string& path);          // absent path: no-op
  void apply_override(const std::string& key_eq_value);  // dotted.path=json-or-string
  void set(const std::string& dotted, nlohmann::json value);

  void validate() const;  // throws ConfigError on unknown keys

  const nlohmann::json& values() const { return values_; }
  nlohmann::json at(const std::string& dotted) const;
  bool has(const std::string& dotted) const;

  template <typename T>
  T get(const std::string& dotted) const {
    return at(dotted).get<T>();
  }

  std::uint64_t seed() const { return get<std::uint64_t>("seed"); }

  // FNV-1a of the canonical dump; echoed into checkpoints and reports.
  std::string hash() const;
  void write_echo(const std::string& out_dir) const;

  static std::string hash_of(const nlohmann::json& j);

 private:
  nlohmann::json values_;
  std::vector<std::string> allowed_;
};

}  // namespace ego
