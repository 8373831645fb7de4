#pragma once

// Hyperparameter records for the latent model and the autoregressive
// prior. Every architectural choice that is not forced by the data
// shape lives here and is persisted in the checkpoint.

#include <string>

#include "speechmesh/audio/mel.hpp"
#include "speechmesh/core/check.hpp"
#include "speechmesh/model/checkpoint.hpp"
#include "speechmesh/nn/layers.hpp"

namespace speechmesh {

enum class LatentKind { kCategorical, kContinuous };

inline const char* latent_kind_name(LatentKind k) {
  return k == LatentKind::kCategorical ? "categorical" : "continuous";
}
inline LatentKind latent_kind_from_name(const std::string& s) {
  if (s == "categorical") return LatentKind::kCategorical;
  if (s == "continuous") return LatentKind::kContinuous;
  throw contract_error("unknown latent kind: " + s);
}

struct LatentHyper {
  int C = 32;  // categories per head (paper full scale: 128)
  int H = 8;   // latent heads (paper full scale: 64)
  int V = 240;

  // Audio encoder: per-tick projection, tick pooling, then a four-layer
  // temporal convolution stack (causal, kernel 3).
  int mel_ticks = melspec::kTicks;
  int mel_bands = melspec::kBands;
  int tick_proj = 32;
  int tick_pool = 4;
  int audio_layers = 4;
  int audio_kernel = 3;
  int d_audio = 128;

  // Expression encoder: three dense layers plus one forward LSTM.
  int d_expr = 128;

  // Fusion MLP (three layers; output is the latent logits).
  int d_fuse = 128;

  // Decoder: template feature pyramid, two forward LSTM layers, dense
  // up-path with additive skips at each level plus the final
  // vertex-offset skip onto the template.
  int code_embed = 8;  // per head
  int dec_w1 = 256;
  int dec_w2 = 128;
  int dec_w3 = 64;
  int dec_lstm = 128;

  std::string activation = "leaky_relu";
  double coord_scale = 0.01;    // mm -> network units
  double offset_scale = 100.0;  // network units -> mm

  double tau_start = 2.0;
  double tau_end = 0.5;

  double w_high = 1.0;
  double w_low = 0.1;

  LatentKind latent = LatentKind::kCategorical;
  int cont_dim = 16;       // continuous-baseline latent width
  bool use_audio = true;   // false for the expression-only ablation

  int code_feature_dim() const { return H * code_embed; }
  int fusion_in() const { return (use_audio ? d_audio : 0) + d_expr; }
  int fusion_out() const { return latent == LatentKind::kCategorical ? C * H : 2 * cont_dim; }
  nn::Act act() const { return nn::act_from_name(activation); }

  void validate() const {
    check(C >= 2 && H >= 1, "LatentHyper: need C >= 2 and H >= 1");
    check(V > 0, "LatentHyper: V must be > 0");
    check(mel_ticks % tick_pool == 0, "LatentHyper: tick_pool must divide mel_ticks");
    check(cont_dim >= 1, "LatentHyper: cont_dim must be >= 1");
  }

  void to_checkpoint(Checkpoint& c) const {
    c.set_int("latent.C", C);
    c.set_int("latent.H", H);
    c.set_int("latent.V", V);
    c.set_int("latent.mel_ticks", mel_ticks);
    c.set_int("latent.mel_bands", mel_bands);
    c.set_int("latent.tick_proj", tick_proj);
    c.set_int("latent.tick_pool", tick_pool);
    c.set_int("latent.audio_layers", audio_layers);
    c.set_int("latent.audio_kernel", audio_kernel);
    c.set_int("latent.d_audio", d_audio);
    c.set_int("latent.d_expr", d_expr);
    c.set_int("latent.d_fuse", d_fuse);
    c.set_int("latent.code_embed", code_embed);
    c.set_int("latent.dec_w1", dec_w1);
    c.set_int("latent.dec_w2", dec_w2);
    c.set_int("latent.dec_w3", dec_w3);
    c.set_int("latent.dec_lstm", dec_lstm);
    c.set("latent.activation", activation);
    c.set_double("latent.coord_scale", coord_scale);
    c.set_double("latent.offset_scale", offset_scale);
    c.set_double("latent.tau_start", tau_start);
    c.set_double("latent.tau_end", tau_end);
    c.set_double("latent.w_high", w_high);
    c.set_double("latent.w_low", w_low);
    c.set("latent.kind", latent_kind_name(latent));
    c.set_int("latent.cont_dim", cont_dim);
    c.set_int("latent.use_audio", use_audio ? 1 : 0);
  }

  static LatentHyper from_checkpoint(const Checkpoint& c) {
    LatentHyper h;
    h.C = static_cast<int>(c.get_int("latent.C"));
    h.H = static_cast<int>(c.get_int("latent.H"));
    h.V = static_cast<int>(c.get_int("latent.V"));
    h.mel_ticks = static_cast<int>(c.get_int("latent.mel_ticks"));
    h.mel_bands = static_cast<int>(c.get_int("latent.mel_bands"));
    h.tick_proj = static_cast<int>(c.get_int("latent.tick_proj"));
    h.tick_pool = static_cast<int>(c.get_int("latent.tick_pool"));
    h.audio_layers = static_cast<int>(c.get_int("latent.audio_layers"));
    h.audio_kernel = static_cast<int>(c.get_int("latent.audio_kernel"));
    h.d_audio = static_cast<int>(c.get_int("latent.d_audio"));
    h.d_expr = static_cast<int>(c.get_int("latent.d_expr"));
    h.d_fuse = static_cast<int>(c.get_int("latent.d_fuse"));
    h.code_embed = static_cast<int>(c.get_int("latent.code_embed"));
    h.dec_w1 = static_cast<int>(c.get_int("latent.dec_w1"));
    h.dec_w2 = static_cast<int>(c.get_int("latent.dec_w2"));
    h.dec_w3 = static_cast<int>(c.get_int("latent.dec_w3"));
    h.dec_lstm = static_cast<int>(c.get_int("latent.dec_lstm"));
    h.activation = c.get("latent.activation");
    h.coord_scale = c.get_double("latent.coord_scale");
    h.offset_scale = c.get_double("latent.offset_scale");
    h.tau_start = c.get_double("latent.tau_start");
    h.tau_end = c.get_double("latent.tau_end");
    h.w_high = c.get_double("latent.w_high");
    h.w_low = c.get_double("latent.w_low");
    h.latent = latent_kind_from_name(c.get("latent.kind"));
    h.cont_dim = static_cast<int>(c.get_int("latent.cont_dim"));
    h.use_audio = c.get_int("latent.use_audio") != 0;
    h.validate();
    return h;
  }
};

struct PriorHyper {
  int C = 32;
  int H = 8;
  int embed = 32;  // code embedding width
  int width = 64;  // masked conv channels
  // Time dilations of the four masked layers. The first layer is the
  // strictly causal one: its taps cover the H immediately preceding
  // raster positions (current-frame earlier heads plus the tail of the
  // previous frame).
  int dil2 = 2, dil3 = 4, dil4 = 8;

  // Causal audio conditioning pathway (same architecture family as the
  // latent audio encoder).
  int mel_ticks = melspec::kTicks;
  int mel_bands = melspec::kBands;
  int cond_tick_proj = 16;
  int cond_tick_pool = 4;
  int cond_layers = 4;
  int cond_kernel = 3;
  int cond_dim = 64;

  std::string activation = "leaky_relu";

  LatentKind latent = LatentKind::kCategorical;
  int cont_dim = 16;

  nn::Act act() const { return nn::act_from_name(activation); }

  void validate() const {
    check(C >= 2 && H >= 1, "PriorHyper: need C >= 2 and H >= 1");
    check(mel_ticks % cond_tick_pool == 0, "PriorHyper: cond_tick_pool must divide mel_ticks");
  }

  void to_checkpoint(Checkpoint& c) const {
    c.set_int("prior.C", C);
    c.set_int("prior.H", H);
    c.set_int("prior.embed", embed);
    c.set_int("prior.width", width);
    c.set("prior.dilations", "1," + std::to_string(dil2) + "," + std::to_string(dil3) + "," +
                                 std::to_string(dil4));
    c.set_int("prior.mel_ticks", mel_ticks);
    c.set_int("prior.mel_bands", mel_bands);
    c.set_int("prior.cond_tick_proj", cond_tick_proj);
    c.set_int("prior.cond_tick_pool", cond_tick_pool);
    c.set_int("prior.cond_layers", cond_layers);
    c.set_int("prior.cond_kernel", cond_kernel);
    c.set_int("prior.cond_dim", cond_dim);
    c.set("prior.activation", activation);
    c.set("prior.kind", latent_kind_name(latent));
    c.set_int("prior.cont_dim", cont_dim);
  }

  static PriorHyper from_checkpoint(const Checkpoint& c) {
    PriorHyper h;
    h.C = static_cast<int>(c.get_int("prior.C"));
    h.H = static_cast<int>(c.get_int("prior.H"));
    h.embed = static_cast<int>(c.get_int("prior.embed"));
    h.width = static_cast<int>(c.get_int("prior.width"));
    const std::string d = c.get("prior.dilations");
    check_io(d.rfind("1,", 0) == 0, "prior.dilations must start with 1");
    int d2 = 0, d3 = 0, d4 = 0;
    check_io(std::sscanf(d.c_str(), "1,%d,%d,%d", &d2, &d3, &d4) == 3,
             "prior.dilations: cannot parse \"" + d + "\"");
    h.dil2 = d2;
    h.dil3 = d3;
    h.dil4 = d4;
    h.mel_ticks = static_cast<int>(c.get_int("prior.mel_ticks"));
    h.mel_bands = static_cast<int>(c.get_int("prior.mel_bands"));
    h.cond_tick_proj = static_cast<int>(c.get_int("prior.cond_tick_proj"));
    h.cond_tick_pool = static_cast<int>(c.get_int("prior.cond_tick_pool"));
    h.cond_layers = static_cast<int>(c.get_int("prior.cond_layers"));
    h.cond_kernel = static_cast<int>(c.get_int("prior.cond_kernel"));
    h.cond_dim = static_cast<int>(c.get_int("prior.cond_dim"));
    h.activation = c.get("prior.activation");
    h.latent = latent_kind_from_name(c.get("prior.kind"));
    h.cont_dim = static_cast<int>(c.get_int("prior.cont_dim"));
    h.validate();
    return h;
  }
};

}  // namespace speechmesh
