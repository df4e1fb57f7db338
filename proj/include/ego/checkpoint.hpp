#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ego/params.hpp"

// Checkpoint file: magic "EGOCKPT1", a u64 little-endian manifest length, a
// JSON manifest listing {name, shape, dtype, byte_offset, byte_length} per
// tensor plus free-form metadata, then the raw little-endian scalar blob.
// Round trips are bit-exact.

namespace ego {

static_assert(std::endian::native == std::endian::little,
              "checkpoint/dataset formats assume a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'E', 'G', 'O', 'C', 'K', 'P', 'T', '1'};

namespace detail {

template <typename S>
const char* dtype_name() {
  if constexpr (sizeof(S) == 4) return "f32";
  else return "f64";
}

}  // namespace detail

template <typename S>
void save_checkpoint(const std::string& path, const ParamStore<S>& store,
                     const nlohmann::json& meta) {
  nlohmann::json manifest;
  manifest["meta"] = meta;
  manifest["meta"]["optimizer_step"] = store.step_count();
  auto& tensors = manifest["tensors"];
  tensors = nlohmann::json::array();

  std::vector<std::pair<std::string, const Tensor<S>*>> blobs;
  for (const auto& [name, e] : store.entries()) {
    blobs.emplace_back("p." + name, &e.value);
    blobs.emplace_back("opt.m." + name, &e.m);
    blobs.emplace_back("opt.v." + name, &e.v);
  }
  for (const auto& [name, s] : store.bn_states()) {
    blobs.emplace_back("bn." + name + ".mean", &s.running_mean);
    blobs.emplace_back("bn." + name + ".var", &s.running_var);
  }

  std::uint64_t offset = 0;
  for (const auto& [name, t] : blobs) {
    const std::uint64_t bytes = static_cast<std::uint64_t>(t->numel()) * sizeof(S);
    tensors.push_back({{"name", name},
                       {"shape", t->shape()},
                       {"dtype", detail::dtype_name<S>()},
                       {"byte_offset", offset},
                       {"byte_length", bytes}});
    offset += bytes;
  }

  const std::string mtxt = manifest.dump();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write checkpoint: " + path);
  f.write(kCheckpointMagic, 8);
  const std::uint64_t mlen = mtxt.size();
  f.write(reinterpret_cast<const char*>(&mlen), 8);
  f.write(mtxt.data(), static_cast<std::streamsize>(mtxt.size()));
  for (const auto& [name, t] : blobs)
    f.write(reinterpret_cast<const char*>(t->data()),
            static_cast<std::streamsize>(t->numel() * sizeof(S)));
  if (!f) throw IoError("write failed: " + path);
}

// Loads a checkpoint into an empty store; returns the manifest metadata.
template <typename S>
nlohmann::json load_checkpoint(const std::string& path, ParamStore<S>& store) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::string(magic, 8) != std::string(kCheckpointMagic, 8))
    throw IoError("bad checkpoint magic in " + path);
  std::uint64_t mlen = 0;
  f.read(reinterpret_cast<char*>(&mlen), 8);
  std::string mtxt(mlen, '\0');
  f.read(mtxt.data(), static_cast<std::streamsize>(mlen));
  if (!f) throw IoError("truncated checkpoint manifest in " + path);
  nlohmann::json manifest = nlohmann::json::parse(mtxt);

  const std::streampos blob_start = f.tellg();
  for (const auto& jt : manifest.at("tensors")) {
    const std::string name = jt.at("name");
    const std::vector<int> shape = jt.at("shape").get<std::vector<int>>();
    if (jt.at("dtype").get<std::string>() != detail::dtype_name<S>())
      throw IoError("checkpoint dtype mismatch for " + name);
    Tensor<S> t(shape);
    f.seekg(blob_start + static_cast<std::streamoff>(jt.at("byte_offset").get<std::uint64_t>()));
    f.read(reinterpret_cast<char*>(t.data()),
           static_cast<std::streamsize>(jt.at("byte_length").get<std::uint64_t>()));
    if (!f) throw IoError("truncated checkpoint blob for " + name);

    if (name.rfind("p.", 0) == 0) {
      store.create(name.substr(2), std::move(t));
    } else if (name.rfind("opt.m.", 0) == 0) {
      store.entry(name.substr(6)).m = std::move(t);
    } else if (name.rfind("opt.v.", 0) == 0) {
      store.entry(name.substr(6)).v = std::move(t);
    } else if (name.rfind("bn.", 0) == 0) {
      const std::string rest = name.substr(3);
      const auto dotpos = rest.rfind('.');
      const std::string bn_name = rest.substr(0, dotpos);
      auto& state = store.bn_state(bn_name, shape[0]);
      if (rest.substr(dotpos + 1) == "mean") state.running_mean = std::move(t);
      else state.running_var = std::move(t);
    } else {
      throw IoError("unknown tensor kind in checkpoint: " + name);
    }
  }
  store.set_step_count(manifest.at("meta").value("optimizer_step", std::int64_t{0}));
  return manifest.at("meta");
}

}  // namespace ego
