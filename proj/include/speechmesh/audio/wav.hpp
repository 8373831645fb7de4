#pragma once

// Minimal RIFF/WAVE reader and writer for 16-bit PCM mono.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "speechmesh/core/binio.hpp"

namespace speechmesh {

struct Waveform {
  std::vector<float> samples;  // in [-1, 1]
  int sample_rate = 16000;

  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

inline void save_wav(const std::string& path, const Waveform& wave) {
  BinaryWriter w;
  const uint32_t n = static_cast<uint32_t>(wave.samples.size());
  const uint32_t data_bytes = n * 2;
  w.magic("RIFF");
  w.u32(36 + data_bytes);
  w.magic("WAVE");
  w.magic("fmt ");
  w.u32(16);
  w.u16(1);  // PCM
  w.u16(1);  // mono
  w.u32(static_cast<uint32_t>(wave.sample_rate));
  w.u32(static_cast<uint32_t>(wave.sample_rate) * 2);
  w.u16(2);
  w.u16(16);
  w.magic("data");
  w.u32(data_bytes);
  for (float s : wave.samples) {
    const float clamped = std::clamp(s, -1.0f, 1.0f);
    const int32_t q = static_cast<int32_t>(std::lrintf(clamped * 32767.0f));
    w.u16(static_cast<uint16_t>(static_cast<int16_t>(q)));
  }
  write_file_bytes(path, w.bytes());
}

inline Waveform load_wav(const std::string& path) {
  BinaryReader r(read_file_bytes(path));
  r.expect_magic("RIFF", path);
  r.u32();
  r.expect_magic("WAVE", path);

  Waveform wave;
  bool got_fmt = false, got_data = false;
  while (!r.at_end() && r.remaining() >= 8) {
    char id[4];
    r.raw(id, 4);
    const uint32_t size = r.u32();
    if (std::memcmp(id, "fmt ", 4) == 0) {
      check_io(size >= 16, path + ": short fmt chunk");
      const uint16_t format = r.u16();
      const uint16_t channels = r.u16();
      const uint32_t rate = r.u32();
      r.u32();  // byte rate
      r.u16();  // block align
      const uint16_t bits = r.u16();
      for (uint32_t i = 16; i < size; ++i) r.u8();
      check_io(format == 1, path + ": only PCM WAV supported");
      check_io(channels == 1, path + ": only mono WAV supported");
      check_io(bits == 16, path + ": only 16-bit WAV supported");
      wave.sample_rate = static_cast<int>(rate);
      got_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      check_io(got_fmt, path + ": data chunk before fmt chunk");
      const uint32_t n = size / 2;
      wave.samples.resize(n);
      for (uint32_t i = 0; i < n; ++i) {
        const int16_t q = static_cast<int16_t>(r.u16());
        wave.samples[i] = static_cast<float>(q) / 32767.0f;
      }
      if (size % 2) r.u8();  // pad byte
      got_data = true;
    } else {
      for (uint32_t i = 0; i < size; ++i) r.u8();
      if (size % 2 && !r.at_end()) r.u8();
    }
  }
  check_io(got_data, path + ": no data chunk");
  return wave;
}

}  // namespace speechmesh
