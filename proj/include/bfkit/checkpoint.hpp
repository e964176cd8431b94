// Versioned binary checkpoint: named parameter tensors with freeze flags and
// Adam state, an architecture hash, and an opaque metadata blob.
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "bfkit/common.hpp"
#include "bfkit/nn.hpp"

namespace bfkit::nn {

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint64_t arch_hash = 0;
  std::uint64_t step = 0;
  std::string meta_json;
  ParamStore params;
};

namespace ckpt_detail {

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void get(std::ifstream& in, T& v, const std::string& path) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("truncated checkpoint: " + path);
}

inline void put_string(std::ofstream& out, const std::string& s) {
  put(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::ifstream& in, const std::string& path) {
  std::uint32_t len = 0;
  get(in, len, path);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw ParseError("truncated checkpoint: " + path);
  return s;
}

inline void put_doubles(std::ofstream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline void get_doubles(std::ifstream& in, std::vector<double>& v, const std::string& path) {
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!in) throw ParseError("truncated checkpoint: " + path);
}

}  // namespace ckpt_detail

inline void save_checkpoint(const std::string& path, const ParamStore& store,
                            std::uint64_t arch_hash, const std::string& meta_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  out.write("BFCK", 4);
  ckpt_detail::put(out, kCheckpointVersion);
  ckpt_detail::put(out, arch_hash);
  ckpt_detail::put(out, store.step());
  ckpt_detail::put_string(out, meta_json);

  const auto names = store.names();
  ckpt_detail::put(out, static_cast<std::uint32_t>(names.size()));
  for (const auto& name : names) {
    const ParamEntry& e = store.at(name);
    ckpt_detail::put_string(out, name);
    ckpt_detail::put(out, static_cast<std::uint8_t>(e.trainable ? 1 : 0));
    ckpt_detail::put(out, static_cast<std::uint8_t>(e.value.shape.size()));
    for (std::size_t d : e.value.shape)
      ckpt_detail::put(out, static_cast<std::uint32_t>(d));
    ckpt_detail::put_doubles(out, e.value.data);
    ckpt_detail::put_doubles(out, e.m.data);
    ckpt_detail::put_doubles(out, e.v.data);
  }
  if (!out) throw DataError("checkpoint write failed: " + path);
}

// Loads a checkpoint; when expected_arch_hash is given, a mismatch is
// rejected before any tensor is materialized.
inline Checkpoint load_checkpoint(const std::string& path,
                                  std::optional<std::uint64_t> expected_arch_hash = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "BFCK", 4) != 0)
    throw ParseError("not a checkpoint file (bad magic): " + path);

  std::uint16_t version = 0;
  ckpt_detail::get(in, version, path);
  if (version != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version in " + path);

  Checkpoint ck;
  ckpt_detail::get(in, ck.arch_hash, path);
  if (expected_arch_hash && ck.arch_hash != *expected_arch_hash)
    throw StateError("checkpoint architecture hash mismatch for " + path +
                     " (model config differs from the one that produced it)");
  ckpt_detail::get(in, ck.step, path);
  ck.meta_json = ckpt_detail::get_string(in, path);
  ck.params.set_step(ck.step);

  std::uint32_t count = 0;
  ckpt_detail::get(in, count, path);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = ckpt_detail::get_string(in, path);
    std::uint8_t trainable = 0, rank = 0;
    ckpt_detail::get(in, trainable, path);
    ckpt_detail::get(in, rank, path);
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      std::uint32_t v = 0;
      ckpt_detail::get(in, v, path);
      if (v == 0) throw ParseError("zero tensor dimension in " + path);
      d = v;
      n *= v;
    }
    ParamEntry& e = ck.params.create(name, Tensor::zeros(shape));
    e.trainable = trainable != 0;
    ckpt_detail::get_doubles(in, e.value.data, path);
    ckpt_detail::get_doubles(in, e.m.data, path);
    ckpt_detail::get_doubles(in, e.v.data, path);
    (void)n;
  }
  return ck;
}

// Copies values, moments, freeze flags and the step counter from a loaded
// checkpoint into a live store; both must describe identical tensor sets.
inline void restore_into(ParamStore& dest, const Checkpoint& ck) {
  const auto want = dest.names();
  const auto have = ck.params.names();
  if (want != have)
    throw StateError("checkpoint tensor set does not match the model");
  for (const auto& name : want) {
    ParamEntry& d = dest.at(name);
    const ParamEntry& s = ck.params.at(name);
    if (d.value.shape != s.value.shape)
      throw ShapeError("checkpoint tensor " + name + ": " + s.value.shape_str() +
                       " vs model " + d.value.shape_str());
    d.value = s.value;
    d.m = s.m;
    d.v = s.v;
    d.trainable = s.trainable;
  }
  dest.set_step(ck.step);
}

}  // namespace bfkit::nn
