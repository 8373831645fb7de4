#pragma once

// Checkpoint container: ordered hyperparameter table (strings, stored
// verbatim so load->save is byte-identical) plus named f32 parameter
// blobs with shape headers.
//
//   "CKPT", u32 version=1, str kind,
//   u32 n_hyper, { str key, str value } ...
//   u32 n_blobs, { str name, u8 ndim, u32 dims[], f32 data } ...

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "speechmesh/core/binio.hpp"
#include "speechmesh/core/check.hpp"

namespace speechmesh {

inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string kind;  // "latent" or "prior"
  std::vector<std::pair<std::string, std::string>> hyper;

  struct Blob {
    std::string name;
    std::vector<uint32_t> dims;
    std::vector<float> data;
  };
  std::vector<Blob> blobs;

  void set(const std::string& key, const std::string& value) {
    for (auto& kv : hyper) {
      if (kv.first == key) {
        kv.second = value;
        return;
      }
    }
    hyper.emplace_back(key, value);
  }
  void set_int(const std::string& key, int64_t v) { set(key, std::to_string(v)); }
  void set_double(const std::string& key, double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    set(key, os.str());
  }

  bool has(const std::string& key) const {
    for (const auto& kv : hyper)
      if (kv.first == key) return true;
    return false;
  }
  const std::string& get(const std::string& key) const {
    for (const auto& kv : hyper)
      if (kv.first == key) return kv.second;
    throw io_error("checkpoint: missing hyperparameter \"" + key + "\"");
  }
  int64_t get_int(const std::string& key) const { return std::stoll(get(key)); }
  double get_double(const std::string& key) const { return std::stod(get(key)); }

  const Blob& blob(const std::string& name) const {
    for (const auto& b : blobs)
      if (b.name == name) return b;
    throw io_error("checkpoint: missing parameter blob \"" + name + "\"");
  }
};

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  BinaryWriter w;
  w.magic("CKPT");
  w.u32(kCheckpointVersion);
  w.str(ckpt.kind);
  w.u32(static_cast<uint32_t>(ckpt.hyper.size()));
  for (const auto& kv : ckpt.hyper) {
    w.str(kv.first);
    w.str(kv.second);
  }
  w.u32(static_cast<uint32_t>(ckpt.blobs.size()));
  for (const auto& b : ckpt.blobs) {
    w.str(b.name);
    w.u8(static_cast<uint8_t>(b.dims.size()));
    size_t n = 1;
    for (uint32_t d : b.dims) {
      w.u32(d);
      n *= d;
    }
    check(n == b.data.size(), "checkpoint blob \"" + b.name + "\": dims do not match data size");
    w.f32_array(b.data.data(), b.data.size());
  }
  write_file_bytes(path, w.bytes());
}

inline Checkpoint load_checkpoint(const std::string& path) {
  BinaryReader r(read_file_bytes(path));
  r.expect_magic("CKPT", path);
  const uint32_t ver = r.u32();
  check_io(ver == kCheckpointVersion, path + ": unsupported checkpoint version");
  Checkpoint ckpt;
  ckpt.kind = r.str();
  const uint32_t n_hyper = r.u32();
  ckpt.hyper.reserve(n_hyper);
  for (uint32_t i = 0; i < n_hyper; ++i) {
    std::string k = r.str();
    std::string v = r.str();
    ckpt.hyper.emplace_back(std::move(k), std::move(v));
  }
  const uint32_t n_blobs = r.u32();
  ckpt.blobs.resize(n_blobs);
  for (uint32_t i = 0; i < n_blobs; ++i) {
    Checkpoint::Blob& b = ckpt.blobs[i];
    b.name = r.str();
    const uint8_t ndim = r.u8();
    b.dims.resize(ndim);
    size_t n = 1;
    for (uint8_t d = 0; d < ndim; ++d) {
      b.dims[d] = r.u32();
      n *= b.dims[d];
    }
    b.data.resize(n);
    r.f32_array(b.data.data(), n);
  }
  check_io(r.at_end(), path + ": trailing bytes after checkpoint payload");
  return ckpt;
}

}  // namespace speechmesh
