#pragma once

#include <stdexcept>
#include <string>

namespace ego {

// Thrown when tensor/matrix shapes do not satisfy an operation's contract.
struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a forward value goes non-finite or a numeric precondition fails.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown on malformed configs, unknown keys, out-of-range settings.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown on unreadable/unwritable files and corrupt on-disk payloads.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

constexpr int kNumJoints = 16;
constexpr int kNumBones = 15;        // every joint except the root
constexpr int kNumHeatmapJoints = 15;  // every joint except the head
constexpr int kHeatmapSize = 47;
constexpr int kImageSize = 368;

}  // namespace ego
