#pragma once

// Little-endian binary file primitives shared by all speechmesh formats
// (MSHS, MSHT, MELS, LATC, VMAP, GTRK, CKPT). Writers go through an
// atomic write-temp-then-rename so readers never observe partial files.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "speechmesh/core/check.hpp"

namespace speechmesh {

namespace detail {
inline bool host_is_little_endian() {
  const uint32_t probe = 1u;
  uint8_t b;
  std::memcpy(&b, &probe, 1);
  return b == 1;
}
}  // namespace detail

class BinaryWriter {
 public:
  void u8(uint8_t v) { raw(&v, 1); }
  void u16(uint16_t v) { le(v); }
  void u32(uint32_t v) { le(v); }
  void u64(uint64_t v) { le(v); }
  void i64(int64_t v) { le(static_cast<uint64_t>(v)); }
  void f32(float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    le(bits);
  }
  void f64(double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    le(bits);
  }
  void magic(const char tag[5]) { raw(tag, 4); }
  void str(const std::string& s) {
    check(s.size() <= 0xffff, "string too long for binary header");
    u16(static_cast<uint16_t>(s.size()));
    raw(s.data(), s.size());
  }
  void f32_array(const float* data, size_t n) {
    if (detail::host_is_little_endian()) {
      raw(data, n * 4);
    } else {
      for (size_t i = 0; i < n; ++i) f32(data[i]);
    }
  }
  void u16_array(const uint16_t* data, size_t n) {
    if (detail::host_is_little_endian()) {
      raw(data, n * 2);
    } else {
      for (size_t i = 0; i < n; ++i) u16(data[i]);
    }
  }
  void raw(const void* p, size_t n) {
    const char* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }

  const std::vector<char>& bytes() const { return buf_; }

 private:
  template <typename U>
  void le(U v) {
    for (size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::vector<char> buf_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::vector<char> bytes) : buf_(std::move(bytes)) {}

  uint8_t u8() {
    uint8_t v;
    raw(&v, 1);
    return v;
  }
  uint16_t u16() { return le<uint16_t>(); }
  uint32_t u32() { return le<uint32_t>(); }
  uint64_t u64() { return le<uint64_t>(); }
  int64_t i64() { return static_cast<int64_t>(le<uint64_t>()); }
  float f32() {
    uint32_t bits = le<uint32_t>();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64() {
    uint64_t bits = le<uint64_t>();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  void expect_magic(const char tag[5], const std::string& what) {
    char got[4];
    raw(got, 4);
    check_io(std::memcmp(got, tag, 4) == 0, what + ": bad magic (expected \"" + tag + "\")");
  }
  std::string str() {
    uint16_t n = u16();
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
  void f32_array(float* out, size_t n) {
    if (detail::host_is_little_endian()) {
      raw(out, n * 4);
    } else {
      for (size_t i = 0; i < n; ++i) out[i] = f32();
    }
  }
  void u16_array(uint16_t* out, size_t n) {
    if (detail::host_is_little_endian()) {
      raw(out, n * 2);
    } else {
      for (size_t i = 0; i < n; ++i) out[i] = u16();
    }
  }
  void raw(void* p, size_t n) {
    check_io(pos_ + n <= buf_.size(), "truncated file (short read)");
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  bool at_end() const { return pos_ == buf_.size(); }
  size_t remaining() const { return buf_.size() - pos_; }

 private:
  template <typename U>
  U le() {
    U v = 0;
    check_io(pos_ + sizeof(U) <= buf_.size(), "truncated file (short read)");
    for (size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<U>(static_cast<uint8_t>(buf_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }
  std::vector<char> buf_;
  size_t pos_ = 0;
};

inline std::vector<char> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check_io(in.good(), "cannot open file: " + path);
  in.seekg(0, std::ios::end);
  std::streamoff n = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<char> bytes(static_cast<size_t>(n));
  if (n > 0) in.read(bytes.data(), n);
  check_io(in.good(), "failed reading file: " + path);
  return bytes;
}

// Atomic write: temp file in the same directory, then rename over the target.
inline void write_file_bytes(const std::string& path, const std::vector<char>& bytes) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    check_io(out.good(), "cannot open file for writing: " + tmp.string());
    if (!bytes.empty()) out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    check_io(out.good(), "failed writing file: " + tmp.string());
  }
  fs::rename(tmp, target);
}

}  // namespace speechmesh
