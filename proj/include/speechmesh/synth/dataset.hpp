#pragma once

// Procedural dataset: identities, pseudo-speech audio, and paired mesh
// sequences with known correlation structure. Lips are a deterministic
// function of the audio envelope, blinks are an independent Poisson
// process, brow raises fire on a random subset of envelope peaks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "speechmesh/audio/mel.hpp"
#include "speechmesh/audio/wav.hpp"
#include "speechmesh/core/binio.hpp"
#include "speechmesh/core/check.hpp"
#include "speechmesh/core/rng.hpp"
#include "speechmesh/geometry/mesh_io.hpp"
#include "speechmesh/synth/face_rig.hpp"

namespace speechmesh {

struct SynthConfig {
  RegionCounts counts;
  double fps = 30.0;
  int sample_rate = 16000;
  double blink_rate = 0.3;        // events per second
  double blink_duration_ms = 150.0;
  double brow_raise_probability = 0.5;  // per envelope peak
  double brow_duration_ms = 400.0;
  double audio_gain = 0.9;
  double syllable_rate_lo = 3.0;  // Hz
  double syllable_rate_hi = 5.0;
  double lip_gain_mm = 14.0;      // saturating envelope->mm map
  double lip_half_point = 0.12;
  uint64_t seed = 0;

  // Desk-scale dataset shape.
  int train_identities = 8;
  int val_identities = 0;
  int test_identities = 2;
  int sequences_per_identity = 20;
  int frames_per_sequence = 64;

  void validate() const {
    counts.validate();
    check(sample_rate == 16000, "SynthConfig: sample_rate is fixed to 16000");
    check(fps > 0 && blink_rate >= 0 && blink_duration_ms > 0, "SynthConfig: bad timing fields");
    check(train_identities > 0 && test_identities >= 0 && val_identities >= 0 &&
              sequences_per_identity > 0 && frames_per_sequence > 0,
          "SynthConfig: dataset shape fields must be positive");
  }
};

struct GroundTruthTracks {
  std::vector<float> lip_opening;  // mm
  std::vector<float> blink_state;  // [0,1]
  std::vector<float> brow_raise;   // [0,1]

  int num_frames() const { return static_cast<int>(lip_opening.size()); }
  void validate() const {
    check(!lip_opening.empty() && blink_state.size() == lip_opening.size() &&
              brow_raise.size() == lip_opening.size(),
          "GroundTruthTracks: track lengths differ or empty");
    for (size_t i = 0; i < lip_opening.size(); ++i) {
      check(std::isfinite(lip_opening[i]) && std::isfinite(brow_raise[i]),
            "GroundTruthTracks: non-finite value");
      check(blink_state[i] >= 0.0f && blink_state[i] <= 1.0f,
            "GroundTruthTracks: blink_state out of [0,1]");
    }
  }
};

inline constexpr uint32_t kTracksFormatVersion = 1;

inline void save_tracks(const std::string& path, const GroundTruthTracks& gt) {
  gt.validate();
  BinaryWriter w;
  w.magic("GTRK");
  w.u32(kTracksFormatVersion);
  const uint32_t T = static_cast<uint32_t>(gt.num_frames());
  w.u32(T);
  for (uint32_t t = 0; t < T; ++t) {
    w.f32(gt.lip_opening[t]);
    w.f32(gt.blink_state[t]);
    w.f32(gt.brow_raise[t]);
  }
  write_file_bytes(path, w.bytes());
}

inline GroundTruthTracks load_tracks(const std::string& path) {
  BinaryReader r(read_file_bytes(path));
  r.expect_magic("GTRK", path);
  const uint32_t ver = r.u32();
  check_io(ver == kTracksFormatVersion, path + ": unsupported GTRK version");
  const uint32_t T = r.u32();
  GroundTruthTracks gt;
  gt.lip_opening.resize(T);
  gt.blink_state.resize(T);
  gt.brow_raise.resize(T);
  for (uint32_t t = 0; t < T; ++t) {
    gt.lip_opening[t] = r.f32();
    gt.blink_state[t] = r.f32();
    gt.brow_raise[t] = r.f32();
  }
  check_io(r.at_end(), path + ": trailing bytes after GTRK payload");
  return gt;
}

struct SynthAudio {
  Waveform wave;
  std::vector<float> envelope;  // per sample, the generator's own envelope
};

// Pseudo-speech: a harmonic voice amplitude-modulated by a syllabic
// envelope in the 3-5 Hz range, with occasional pauses.
inline SynthAudio synth_audio_with_envelope(const SynthConfig& cfg, uint64_t seed,
                                            double duration_s) {
  check(duration_s > 0.0, "synth_audio: duration must be > 0");
  const int sr = cfg.sample_rate;
  const int n = static_cast<int>(std::llround(duration_s * sr));
  check(n > 0, "synth_audio: duration too short");

  Rng rng = Rng(seed).child("audio");
  SynthAudio out;
  out.wave.sample_rate = sr;
  out.wave.samples.assign(n, 0.0f);
  out.envelope.assign(n, 0.0f);

  // Syllable pulses.
  double t = rng.uniform(0.0, 0.15);
  while (t < duration_s) {
    const double rate = rng.uniform(cfg.syllable_rate_lo, cfg.syllable_rate_hi);
    const double width = 0.8 / rate;
    const double amp = rng.uniform(0.4, 1.0);
    const int lo = std::max(0, static_cast<int>(t * sr));
    const int hi = std::min(n, static_cast<int>((t + width) * sr));
    for (int i = lo; i < hi; ++i) {
      const double phase = (static_cast<double>(i) / sr - t) / width;
      out.envelope[i] += static_cast<float>(amp * 0.5 * (1.0 - std::cos(2.0 * M_PI * phase)));
    }
    t += 1.0 / rate;
    if (rng.uniform() < 0.12) t += rng.uniform(0.25, 0.6);  // pause
  }
  for (float& e : out.envelope) e = std::min(e, 1.0f);

  // Harmonic voice.
  const double f0 = rng.uniform(100.0, 180.0);
  double phases[6];
  double amps[6];
  double norm = 0.0;
  for (int k = 0; k < 6; ++k) {
    phases[k] = rng.uniform(0.0, 2.0 * M_PI);
    amps[k] = 1.0 / (k + 1);
    norm += amps[k];
  }
  for (int i = 0; i < n; ++i) {
    const double ts = static_cast<double>(i) / sr;
    double voice = 0.0;
    for (int k = 0; k < 6; ++k) voice += amps[k] * std::sin(2.0 * M_PI * f0 * (k + 1) * ts + phases[k]);
    double s = cfg.audio_gain * out.envelope[i] * voice / norm;
    out.wave.samples[i] = static_cast<float>(std::clamp(s, -1.0, 1.0));
  }
  return out;
}

inline Waveform synth_audio(const SynthConfig& cfg, uint64_t seed, double duration_s) {
  return synth_audio_with_envelope(cfg, seed, duration_s).wave;
}

// Rectified waveform smoothed by a 50ms moving average.
inline std::vector<float> smoothed_envelope(const Waveform& wave) {
  const int n = static_cast<int>(wave.samples.size());
  const int half = wave.sample_rate / 40;  // 25ms each side
  std::vector<double> prefix(n + 1, 0.0);
  for (int i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + std::abs(wave.samples[i]);
  std::vector<float> env(n);
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half);
    const int hi = std::min(n, i + half + 1);
    env[i] = static_cast<float>((prefix[hi] - prefix[lo]) / (hi - lo));
  }
  return env;
}

// Ground-truth lip trajectory: smoothed rectified envelope, sampled at
// the visual frame rate, through a fixed saturating monotone map to mm.
// synth_sequence uses exactly this function for its lip track.
inline std::vector<float> oracle_lip_trajectory(const SynthConfig& cfg, const Waveform& wave) {
  check(wave.sample_rate == cfg.sample_rate, "oracle_lip_trajectory: expected 16kHz waveform");
  const int T = num_visual_frames(wave, cfg.fps);
  check(T >= 1, "oracle_lip_trajectory: waveform shorter than one visual frame");
  const std::vector<float> env = smoothed_envelope(wave);
  std::vector<float> lip(T);
  for (int t = 0; t < T; ++t) {
    const int idx = std::min(static_cast<int>(env.size()) - 1,
                             static_cast<int>(std::llround((t + 0.5) * cfg.sample_rate / cfg.fps)));
    const double e = env[idx];
    lip[t] = static_cast<float>(cfg.lip_gain_mm * e / (e + cfg.lip_half_point));
  }
  return lip;
}

namespace detail {

// Poisson blink process; each event is a raised-cosine closure profile.
inline std::vector<float> blink_track(const SynthConfig& cfg, Rng rng, int T) {
  std::vector<float> blink(T, 0.0f);
  const double duration_frames = cfg.blink_duration_ms / 1000.0 * cfg.fps;
  if (cfg.blink_rate <= 0.0) return blink;
  double t = 0.0;
  const double total = T / cfg.fps;
  while (true) {
    t += -std::log(rng.uniform()) / cfg.blink_rate;  // exponential gap
    if (t >= total) break;
    const double center = t * cfg.fps;
    const int lo = std::max(0, static_cast<int>(std::floor(center - duration_frames / 2)));
    const int hi = std::min(T - 1, static_cast<int>(std::ceil(center + duration_frames / 2)));
    for (int f = lo; f <= hi; ++f) {
      const double phase = (f - center) / (duration_frames / 2);
      if (std::abs(phase) <= 1.0)
        blink[f] += static_cast<float>(0.5 * (1.0 + std::cos(M_PI * phase)));
    }
  }
  for (float& b : blink) b = std::min(b, 1.0f);
  return blink;
}

// Brow raises on a random subset of lip-track peaks.
inline std::vector<float> brow_track(const SynthConfig& cfg, Rng rng, const std::vector<float>& lip) {
  const int T = static_cast<int>(lip.size());
  std::vector<float> brow(T, 0.0f);
  float peak = 0.0f;
  for (float v : lip) peak = std::max(peak, v);
  if (peak <= 0.0f) return brow;
  const float threshold = 0.55f * peak;
  const double duration_frames = cfg.brow_duration_ms / 1000.0 * cfg.fps;
  for (int t = 1; t + 1 < T; ++t) {
    const bool is_peak = lip[t] >= threshold && lip[t] >= lip[t - 1] && lip[t] > lip[t + 1];
    if (!is_peak) continue;
    if (rng.uniform() >= cfg.brow_raise_probability) continue;
    const double amp = rng.uniform(0.5, 1.0);
    const int lo = std::max(0, static_cast<int>(std::floor(t - duration_frames / 2)));
    const int hi = std::min(T - 1, static_cast<int>(std::ceil(t + duration_frames / 2)));
    for (int f = lo; f <= hi; ++f) {
      const double phase = (f - t) / (duration_frames / 2);
      if (std::abs(phase) <= 1.0)
        brow[f] += static_cast<float>(amp * 0.5 * (1.0 + std::cos(M_PI * phase)));
    }
  }
  for (float& b : brow) b = std::min(b, 1.0f);
  return brow;
}

}  // namespace detail

inline TemplateMesh synth_identity(const FaceRig& rig, uint64_t seed, const std::string& id) {
  return rig.make_identity(seed, id);
}

struct SynthSequence {
  MeshSequence meshes;
  GroundTruthTracks tracks;
};

inline SynthSequence synth_sequence(const SynthConfig& cfg, const FaceRig& rig,
                                    const TemplateMesh& identity, const Waveform& wave,
                                    uint64_t seed) {
  check(identity.vertex_count() == rig.vertex_count(), "synth_sequence: identity/rig mismatch");
  const int T = num_visual_frames(wave, cfg.fps);
  check(T >= 1, "synth_sequence: waveform shorter than one visual frame");

  SynthSequence out;
  out.tracks.lip_opening = oracle_lip_trajectory(cfg, wave);
  Rng rng(seed);
  out.tracks.blink_state = detail::blink_track(cfg, rng.child("blink"), T);
  out.tracks.brow_raise = detail::brow_track(cfg, rng.child("brow"), out.tracks.lip_opening);
  out.meshes = rig.apply_tracks(identity, out.tracks.lip_opening, out.tracks.blink_state,
                                out.tracks.brow_raise, static_cast<float>(cfg.fps));
  return out;
}

// ---------------------------------------------------------------------------
// Dataset on disk:
//   <root>/<identity>/template.msht
//   <root>/<identity>/seq_###.{wav,mshs,gt[,mels]}
//   <root>/manifest.txt   lines: "<identity> <train|val|test>"
// ---------------------------------------------------------------------------

struct DatasetEntry {
  std::string identity;
  std::string split;
  std::string dir;
  std::vector<std::string> sequence_stems;
};

inline std::string split_name(int identity_index, const SynthConfig& cfg) {
  if (identity_index < cfg.train_identities) return "train";
  if (identity_index < cfg.train_identities + cfg.val_identities) return "val";
  return "test";
}

// Number of samples so that the sequence has exactly `frames` visual frames.
inline int samples_for_frames(int frames, int sample_rate, double fps) {
  return static_cast<int>(std::ceil(frames * sample_rate / fps)) + 1;
}

inline void generate_dataset(const SynthConfig& cfg, const std::string& root,
                             bool with_features = true) {
  cfg.validate();
  const FaceRig rig(cfg.counts);
  namespace fs = std::filesystem;
  fs::create_directories(root);

  const int total_ids = cfg.train_identities + cfg.val_identities + cfg.test_identities;
  Rng master(cfg.seed);
  std::string manifest;
  for (int i = 0; i < total_ids; ++i) {
    char id_name[32];
    std::snprintf(id_name, sizeof(id_name), "id_%03d", i);
    const std::string dir = root + "/" + id_name;
    fs::create_directories(dir);
    const uint64_t id_seed = master.child("identity").child(static_cast<uint64_t>(i)).raw();
    const TemplateMesh identity = rig.make_identity(id_seed, id_name);
    save_template_mesh(dir + "/template.msht", identity);
    manifest += std::string(id_name) + " " + split_name(i, cfg) + "\n";

    const double duration =
        static_cast<double>(samples_for_frames(cfg.frames_per_sequence, cfg.sample_rate, cfg.fps)) /
        cfg.sample_rate;
    for (int s = 0; s < cfg.sequences_per_identity; ++s) {
      char seq_name[32];
      std::snprintf(seq_name, sizeof(seq_name), "seq_%03d", s);
      const uint64_t seq_seed =
          master.child("sequence").child(static_cast<uint64_t>(i) * 100003 + s).raw();
      const Waveform wave = synth_audio(cfg, seq_seed, duration);
      SynthSequence synth = synth_sequence(cfg, rig, identity, wave, seq_seed ^ 0x5eedull);

      // Trim to the configured frame count.
      const int T = cfg.frames_per_sequence;
      check(synth.meshes.num_frames >= T, "generate_dataset: sequence shorter than configured");
      synth.meshes.num_frames = T;
      synth.meshes.data.resize(static_cast<size_t>(T) * synth.meshes.num_vertices * 3);
      synth.tracks.lip_opening.resize(T);
      synth.tracks.blink_state.resize(T);
      synth.tracks.brow_raise.resize(T);

      const std::string stem = dir + "/" + seq_name;
      save_wav(stem + ".wav", wave);
      save_mesh_sequence(stem + ".mshs", synth.meshes);
      save_tracks(stem + ".gt", synth.tracks);
      if (with_features) {
        save_audio_features(stem + ".mels", mel_spectrogram(wave, T, cfg.fps));
      }
    }
  }
  write_file_bytes(root + "/manifest.txt", std::vector<char>(manifest.begin(), manifest.end()));
}

inline std::vector<DatasetEntry> read_manifest(const std::string& root) {
  std::ifstream in(root + "/manifest.txt");
  check_io(in.good(), "cannot open manifest: " + root + "/manifest.txt");
  std::vector<DatasetEntry> entries;
  std::string identity, split;
  while (in >> identity >> split) {
    check_io(split == "train" || split == "val" || split == "test",
             "manifest: unknown split \"" + split + "\"");
    DatasetEntry e;
    e.identity = identity;
    e.split = split;
    e.dir = root + "/" + identity;
    namespace fs = std::filesystem;
    check_io(fs::exists(e.dir), "manifest lists missing identity dir: " + e.dir);
    std::vector<std::string> stems;
    for (const auto& p : fs::directory_iterator(e.dir)) {
      if (p.path().extension() == ".mshs") stems.push_back(p.path().stem().string());
    }
    std::sort(stems.begin(), stems.end());
    e.sequence_stems = std::move(stems);
    entries.push_back(std::move(e));
  }
  check_io(!entries.empty(), "manifest is empty: " + root);
  return entries;
}

// Fully loaded sequence (meshes + features + ground truth).
struct LoadedSequence {
  int identity_index = 0;
  MeshSequence meshes;
  AudioFeatures features;
  GroundTruthTracks tracks;
  Waveform wave;
};

struct LoadedDataset {
  std::vector<TemplateMesh> templates;          // per identity
  std::vector<std::string> identity_ids;
  std::vector<std::string> splits;              // per identity
  std::vector<LoadedSequence> sequences;        // all splits mixed; see identity_index

  std::vector<int> sequence_indices(const std::string& split) const {
    std::vector<int> idx;
    for (size_t i = 0; i < sequences.size(); ++i)
      if (splits[sequences[i].identity_index] == split) idx.push_back(static_cast<int>(i));
    return idx;
  }
};

inline LoadedDataset load_dataset(const std::string& root, bool with_waveforms = false) {
  LoadedDataset ds;
  const auto entries = read_manifest(root);
  for (const auto& e : entries) {
    const int id_index = static_cast<int>(ds.templates.size());
    ds.templates.push_back(load_template_mesh(e.dir + "/template.msht"));
    ds.templates.back().identity_id = e.identity;
    ds.identity_ids.push_back(e.identity);
    ds.splits.push_back(e.split);
    for (const auto& stem : e.sequence_stems) {
      LoadedSequence seq;
      seq.identity_index = id_index;
      seq.meshes = load_mesh_sequence(e.dir + "/" + stem + ".mshs");
      seq.tracks = load_tracks(e.dir + "/" + stem + ".gt");
      const std::string mels = e.dir + "/" + stem + ".mels";
      if (std::filesystem::exists(mels)) {
        seq.features = load_audio_features(mels);
      } else {
        const Waveform wave = load_wav(e.dir + "/" + stem + ".wav");
        seq.features = mel_spectrogram(wave, seq.meshes.num_frames);
      }
      if (with_waveforms) seq.wave = load_wav(e.dir + "/" + stem + ".wav");
      check_io(seq.features.num_frames == seq.meshes.num_frames,
               "dataset: feature/mesh frame count mismatch for " + stem);
      ds.sequences.push_back(std::move(seq));
    }
  }
  return ds;
}

}  // namespace speechmesh
