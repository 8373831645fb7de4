#pragma once

// Flat key-value run configuration. Every tunable default of the
// toolkit is registered here under a dotted key so `dump-config` can
// print the complete set and config files can override any of them.
// Unknown keys are rejected. A few entries are contract constants
// (e.g. the mel framing); they are printed for auditability but cannot
// be overridden.

#include <cstdint>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "speechmesh/audio/mel.hpp"
#include "speechmesh/core/check.hpp"
#include "speechmesh/model/hyper.hpp"
#include "speechmesh/prior/prior_train.hpp"
#include "speechmesh/synth/dataset.hpp"
#include "speechmesh/train/trainer.hpp"

namespace speechmesh {

class RunConfig {
 public:
  SynthConfig synth;
  LatentHyper latent;
  PriorHyper prior;

  std::string train_mode = "expr_audio_xmod";
  int train_steps = 2000;
  int train_batch = 4;
  int train_crop_frames = 32;
  double train_lr = 1e-3;
  double kl_weight = 1e-3;
  int log_every = 25;

  int prior_steps = 800;
  int prior_batch = 4;
  int prior_crop_frames = 32;
  double prior_lr = 1e-3;

  double sample_temperature = 1.0;
  uint64_t seed = 0;
  std::string data_dir = "data";

  RunConfig() = default;

  TrainConfig train_config() const {
    TrainConfig cfg;
    cfg.mode = train_mode_from_name(train_mode);
    cfg.hyper = latent;
    cfg.steps = train_steps;
    cfg.batch = train_batch;
    cfg.crop_frames = train_crop_frames;
    cfg.lr = train_lr;
    cfg.kl_weight = kl_weight;
    cfg.seed = seed;
    cfg.log_every = log_every;
    return cfg;
  }

  PriorTrainConfig prior_config() const {
    PriorTrainConfig cfg;
    cfg.hyper = prior;
    cfg.hyper.C = latent.C;
    cfg.hyper.H = latent.H;
    cfg.hyper.latent = latent.latent;
    cfg.hyper.cont_dim = latent.cont_dim;
    cfg.steps = prior_steps;
    cfg.batch = prior_batch;
    cfg.crop_frames = prior_crop_frames;
    cfg.lr = prior_lr;
    cfg.seed = seed;
    return cfg;
  }

  void set(const std::string& key, const std::string& value) {
    for (auto& e : entries()) {
      if (e.key != key) continue;
      check(e.setter != nullptr, "config key \"" + key + "\" is fixed by the format contract");
      e.setter(value);
      return;
    }
    throw contract_error("unknown config key: \"" + key + "\"");
  }

  void apply_file(const std::string& path) {
    std::ifstream in(path);
    check_io(in.good(), "cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const size_t hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      const auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      const std::string t = trim(line);
      if (t.empty()) continue;
      const size_t eq = t.find('=');
      check(eq != std::string::npos,
            path + ":" + std::to_string(lineno) + ": expected \"key = value\"");
      set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
  }

  void dump(std::ostream& os) const {
    for (const auto& e : const_cast<RunConfig*>(this)->entries())
      os << e.key << " = " << e.getter() << "\n";
  }

 private:
  struct Entry {
    std::string key;
    std::function<std::string()> getter;
    std::function<void(const std::string&)> setter;  // null = fixed constant
  };

  static std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  }

  std::vector<Entry> entries() {
    std::vector<Entry> e;
    auto add_int = [&](const std::string& k, int* p) {
      e.push_back({k, [p] { return std::to_string(*p); },
                   [p](const std::string& v) { *p = std::stoi(v); }});
    };
    auto add_u64 = [&](const std::string& k, uint64_t* p) {
      e.push_back({k, [p] { return std::to_string(*p); },
                   [p](const std::string& v) { *p = std::stoull(v); }});
    };
    auto add_double = [&](const std::string& k, double* p) {
      e.push_back({k, [p] { return fmt(*p); },
                   [p](const std::string& v) { *p = std::stod(v); }});
    };
    auto add_str = [&](const std::string& k, std::string* p) {
      e.push_back({k, [p] { return *p; }, [p](const std::string& v) { *p = v; }});
    };
    auto add_fixed = [&](const std::string& k, const std::string& v) {
      e.push_back({k, [v] { return v; }, nullptr});
    };

    add_u64("seed", &seed);
    add_str("data.dir", &data_dir);

    add_int("synth.lip_vertices", &synth.counts.lip);
    add_int("synth.mouth_vertices", &synth.counts.mouth);
    add_int("synth.upper_face_vertices", &synth.counts.upper_face);
    add_int("synth.eyelid_vertices", &synth.counts.eyelid);
    add_int("synth.other_vertices", &synth.counts.other);
    add_double("synth.fps", &synth.fps);
    add_fixed("synth.sample_rate", "16000");
    add_double("synth.blink_rate", &synth.blink_rate);
    add_double("synth.blink_duration_ms", &synth.blink_duration_ms);
    add_double("synth.brow_raise_probability", &synth.brow_raise_probability);
    add_double("synth.brow_duration_ms", &synth.brow_duration_ms);
    add_double("synth.audio_gain", &synth.audio_gain);
    add_double("synth.syllable_rate_lo", &synth.syllable_rate_lo);
    add_double("synth.syllable_rate_hi", &synth.syllable_rate_hi);
    add_double("synth.lip_gain_mm", &synth.lip_gain_mm);
    add_double("synth.lip_half_point", &synth.lip_half_point);
    add_int("synth.train_identities", &synth.train_identities);
    add_int("synth.val_identities", &synth.val_identities);
    add_int("synth.test_identities", &synth.test_identities);
    add_int("synth.sequences_per_identity", &synth.sequences_per_identity);
    add_int("synth.frames_per_sequence", &synth.frames_per_sequence);

    add_fixed("mel.bands", std::to_string(melspec::kBands));
    add_fixed("mel.window_samples", std::to_string(melspec::kStftWindow));
    add_fixed("mel.hop_samples", std::to_string(melspec::kStftHop));
    add_fixed("mel.fft_size", std::to_string(melspec::kFftSize));
    add_fixed("mel.snippet_ms", "600");
    add_fixed("mel.lead_ms", "500");
    add_fixed("mel.lag_ms", "100");
    add_fixed("mel.ticks_per_frame", std::to_string(melspec::kTicks));
    add_fixed("mel.log_floor", "1e-10");
    add_fixed("mel.fmax_hz", "8000");

    add_int("latent.C", &latent.C);
    add_int("latent.H", &latent.H);
    add_int("latent.tick_proj", &latent.tick_proj);
    add_int("latent.tick_pool", &latent.tick_pool);
    add_int("latent.audio_layers", &latent.audio_layers);
    add_int("latent.audio_kernel", &latent.audio_kernel);
    add_int("latent.d_audio", &latent.d_audio);
    add_int("latent.d_expr", &latent.d_expr);
    add_int("latent.d_fuse", &latent.d_fuse);
    add_int("latent.code_embed", &latent.code_embed);
    add_int("latent.dec_w1", &latent.dec_w1);
    add_int("latent.dec_w2", &latent.dec_w2);
    add_int("latent.dec_w3", &latent.dec_w3);
    add_int("latent.dec_lstm", &latent.dec_lstm);
    add_str("latent.activation", &latent.activation);
    add_double("latent.coord_scale", &latent.coord_scale);
    add_double("latent.offset_scale", &latent.offset_scale);
    add_double("latent.tau_start", &latent.tau_start);
    add_double("latent.tau_end", &latent.tau_end);
    add_double("latent.w_high", &latent.w_high);
    add_double("latent.w_low", &latent.w_low);
    e.push_back({"latent.kind", [this] { return std::string(latent_kind_name(latent.latent)); },
                 [this](const std::string& v) { latent.latent = latent_kind_from_name(v); }});
    add_int("latent.cont_dim", &latent.cont_dim);

    add_str("train.mode", &train_mode);
    add_int("train.steps", &train_steps);
    add_int("train.batch", &train_batch);
    add_int("train.crop_frames", &train_crop_frames);
    add_double("train.lr", &train_lr);
    add_double("train.kl_weight", &kl_weight);
    add_int("train.log_every", &log_every);

    add_int("prior.embed", &prior.embed);
    add_int("prior.width", &prior.width);
    add_int("prior.dilation2", &prior.dil2);
    add_int("prior.dilation3", &prior.dil3);
    add_int("prior.dilation4", &prior.dil4);
    add_fixed("prior.dilation1", "1");
    add_int("prior.cond_tick_proj", &prior.cond_tick_proj);
    add_int("prior.cond_tick_pool", &prior.cond_tick_pool);
    add_int("prior.cond_layers", &prior.cond_layers);
    add_int("prior.cond_kernel", &prior.cond_kernel);
    add_int("prior.cond_dim", &prior.cond_dim);
    add_int("prior.steps", &prior_steps);
    add_int("prior.batch", &prior_batch);
    add_int("prior.crop_frames", &prior_crop_frames);
    add_double("prior.lr", &prior_lr);

    add_double("sample.temperature", &sample_temperature);
    return e;
  }
};

}  // namespace speechmesh
