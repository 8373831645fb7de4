#pragma once

// Log-Mel feature extraction aligned to visual frames.
//
// For visual frame t (at time t/fps) the feature block covers the 600ms
// snippet from 500ms before to 100ms after the frame: 9600 samples at
// 16kHz. Within that window, STFT frames are centered on a 10ms (160
// sample) grid so exactly 60 frames fit; the analysis window is 800
// samples (Hann), transformed at 1024 points, mapped to 80 triangular
// Mel filters spanning 0..8kHz, then log with floor 1e-10.
//
// Samples outside the waveform are zero; samples outside the 600ms
// window needed by edge STFT frames are mirror-reflected at the window
// bounds.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "speechmesh/audio/wav.hpp"
#include "speechmesh/core/binio.hpp"
#include "speechmesh/core/check.hpp"

namespace speechmesh {

namespace melspec {
constexpr int kSampleRate = 16000;
constexpr int kWindowSamples = 9600;  // 600ms
constexpr int kLeadSamples = 8000;    // 500ms before the visual frame
constexpr int kStftWindow = 800;
constexpr int kStftHop = 160;  // 10ms
constexpr int kFftSize = 1024;
constexpr int kTicks = kWindowSamples / kStftHop;  // 60 STFT frames per visual frame
constexpr int kBands = 80;
constexpr double kFminHz = 0.0;
constexpr double kFmaxHz = 8000.0;
constexpr double kLogFloor = 1e-10;

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Center frequency (Hz) of Mel band i, i in [0, kBands).
inline double band_center_hz(int i) {
  const double lo = hz_to_mel(kFminHz), hi = hz_to_mel(kFmaxHz);
  return mel_to_hz(lo + (hi - lo) * (i + 1) / (kBands + 1));
}
}  // namespace melspec

// In-place iterative radix-2 FFT. n must be a power of two.
inline void fft_radix2(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

struct AudioFeatures {
  int num_frames = 0;            // T visual frames
  int ticks = melspec::kTicks;   // STFT frames per visual frame
  int bands = melspec::kBands;   // Mel bands
  std::vector<float> data;       // [t][tick][band]

  float& at(int t, int f, int m) { return data[(static_cast<size_t>(t) * ticks + f) * bands + m]; }
  float at(int t, int f, int m) const { return data[(static_cast<size_t>(t) * ticks + f) * bands + m]; }

  // (bands x ticks*T) view; column j = visual frame j/ticks, tick j%ticks.
  Eigen::Map<const Eigen::MatrixXf> tick_matrix() const {
    return Eigen::Map<const Eigen::MatrixXf>(data.data(), bands,
                                             static_cast<Eigen::Index>(ticks) * num_frames);
  }
};

namespace detail {

struct MelFilter {
  int first_bin;
  std::vector<double> weights;
};

inline const std::vector<MelFilter>& mel_filterbank() {
  static const std::vector<MelFilter> bank = [] {
    using namespace melspec;
    std::vector<MelFilter> filters(kBands);
    const double mel_lo = hz_to_mel(kFminHz), mel_hi = hz_to_mel(kFmaxHz);
    std::vector<double> edges(kBands + 2);
    for (int i = 0; i < kBands + 2; ++i)
      edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (kBands + 1));
    const double bin_hz = static_cast<double>(kSampleRate) / kFftSize;
    const int n_bins = kFftSize / 2 + 1;
    for (int i = 0; i < kBands; ++i) {
      const double f_lo = edges[i], f_c = edges[i + 1], f_hi = edges[i + 2];
      int first = -1;
      std::vector<double> w;
      for (int k = 0; k < n_bins; ++k) {
        const double f = k * bin_hz;
        double value = 0.0;
        if (f > f_lo && f < f_c) value = (f - f_lo) / (f_c - f_lo);
        else if (f >= f_c && f < f_hi) value = (f_hi - f) / (f_hi - f_c);
        if (value > 0.0) {
          if (first < 0) first = k;
          w.push_back(value);
        } else if (first >= 0) {
          break;
        }
      }
      filters[i] = MelFilter{first < 0 ? 0 : first, std::move(w)};
    }
    return filters;
  }();
  return bank;
}

inline const std::vector<double>& hann_window() {
  static const std::vector<double> win = [] {
    std::vector<double> w(melspec::kStftWindow);
    for (int n = 0; n < melspec::kStftWindow; ++n)
      w[n] = 0.5 * (1.0 - std::cos(2.0 * M_PI * n / melspec::kStftWindow));
    return w;
  }();
  return win;
}

// Mirror reflection of index into [0, size).
inline int reflect_index(int idx, int size) {
  while (idx < 0 || idx >= size) {
    if (idx < 0) idx = -idx;
    if (idx >= size) idx = 2 * (size - 1) - idx;
  }
  return idx;
}

}  // namespace detail

// Number of visual frames covered by a waveform at the given frame rate.
inline int num_visual_frames(const Waveform& wave, double fps = 30.0) {
  return static_cast<int>(std::floor(static_cast<double>(wave.samples.size()) * fps /
                                     wave.sample_rate));
}

inline AudioFeatures mel_spectrogram(const Waveform& wave, int visual_frames, double fps = 30.0) {
  using namespace melspec;
  check(wave.sample_rate == kSampleRate,
        "mel_spectrogram: expected 16kHz audio, got " + std::to_string(wave.sample_rate) + "Hz");
  check(!wave.samples.empty(), "mel_spectrogram: empty waveform");
  check(visual_frames >= 1, "mel_spectrogram: need at least one visual frame");
  check(fps > 0.0, "mel_spectrogram: fps must be positive");

  const auto& bank = detail::mel_filterbank();
  const auto& win = detail::hann_window();
  const int n_samples = static_cast<int>(wave.samples.size());

  AudioFeatures feat;
  feat.num_frames = visual_frames;
  feat.data.resize(static_cast<size_t>(visual_frames) * kTicks * kBands);

  std::vector<double> window(kWindowSamples);
  std::vector<std::complex<double>> spec(kFftSize);
  std::vector<double> power(kFftSize / 2 + 1);

  for (int t = 0; t < visual_frames; ++t) {
    // 600ms snippet for this visual frame; zeros outside the waveform.
    const int start =
        static_cast<int>(std::lround(t * kSampleRate / fps)) - kLeadSamples;
    for (int i = 0; i < kWindowSamples; ++i) {
      const int idx = start + i;
      window[i] = (idx >= 0 && idx < n_samples) ? static_cast<double>(wave.samples[idx]) : 0.0;
    }
    for (int f = 0; f < kTicks; ++f) {
      const int center = f * kStftHop + kStftHop / 2;
      for (int n = 0; n < kFftSize; ++n) spec[n] = 0.0;
      for (int n = 0; n < kStftWindow; ++n) {
        const int idx = detail::reflect_index(center - kStftWindow / 2 + n, kWindowSamples);
        spec[n] = window[idx] * win[n];
      }
      fft_radix2(spec);
      for (int k = 0; k <= kFftSize / 2; ++k) power[k] = std::norm(spec[k]);
      float* out = &feat.at(t, f, 0);
      for (int m = 0; m < kBands; ++m) {
        double e = 0.0;
        const auto& filt = bank[m];
        for (size_t j = 0; j < filt.weights.size(); ++j)
          e += filt.weights[j] * power[filt.first_bin + j];
        out[m] = static_cast<float>(std::log(e > kLogFloor ? e : kLogFloor));
      }
    }
  }
  return feat;
}

// Feature cache: "MELS", u32 version=1, u32 T, u32 F, u32 M, f32 payload.
inline constexpr uint32_t kMelsFormatVersion = 1;

inline void save_audio_features(const std::string& path, const AudioFeatures& feat) {
  BinaryWriter w;
  w.magic("MELS");
  w.u32(kMelsFormatVersion);
  w.u32(static_cast<uint32_t>(feat.num_frames));
  w.u32(static_cast<uint32_t>(feat.ticks));
  w.u32(static_cast<uint32_t>(feat.bands));
  w.f32_array(feat.data.data(), feat.data.size());
  write_file_bytes(path, w.bytes());
}

inline AudioFeatures load_audio_features(const std::string& path) {
  BinaryReader r(read_file_bytes(path));
  r.expect_magic("MELS", path);
  const uint32_t ver = r.u32();
  check_io(ver == kMelsFormatVersion, path + ": unsupported MELS version " + std::to_string(ver));
  AudioFeatures feat;
  feat.num_frames = static_cast<int>(r.u32());
  feat.ticks = static_cast<int>(r.u32());
  feat.bands = static_cast<int>(r.u32());
  check_io(feat.num_frames >= 1 && feat.ticks >= 1 && feat.bands >= 1,
           path + ": degenerate MELS dimensions");
  feat.data.resize(static_cast<size_t>(feat.num_frames) * feat.ticks * feat.bands);
  r.f32_array(feat.data.data(), feat.data.size());
  check_io(r.at_end(), path + ": trailing bytes after MELS payload");
  return feat;
}

}  // namespace speechmesh
