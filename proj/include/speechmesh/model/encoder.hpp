#pragma once

// Latent encoder: audio pathway (per-tick projection, tick pooling,
// four-layer causal temporal convolution), expression pathway (three
// dense layers plus one forward LSTM), and the three-layer fusion MLP
// that emits the per-frame latent logits.

#include <Eigen/Dense>
#include <vector>

#include "speechmesh/core/check.hpp"
#include "speechmesh/core/rng.hpp"
#include "speechmesh/model/hyper.hpp"
#include "speechmesh/nn/batch.hpp"
#include "speechmesh/nn/layers.hpp"

namespace speechmesh {

// Shared by the latent encoder and the prior's conditioning pathway.
template <class S>
class AudioEncoder {
 public:
  struct Arch {
    int mel_bands, mel_ticks, tick_proj, tick_pool, layers, kernel, out_dim;
    nn::Act act;
  };

  AudioEncoder() = default;
  AudioEncoder(const Arch& arch, Rng& rng) { init(arch, rng); }

  void init(const Arch& arch, Rng& rng) {
    arch_ = arch;
    check(arch.mel_ticks % arch.tick_pool == 0, "AudioEncoder: tick_pool must divide mel_ticks");
    bins_ = arch.mel_ticks / arch.tick_pool;
    tick_proj_.init(arch.mel_bands, arch.tick_proj, rng);
    act0_ = nn::Activation<S>(arch.act);
    pool_ = nn::ColumnPool<S>(arch.tick_pool);
    merge_.init(arch.tick_proj * bins_, arch.out_dim, rng);
    act1_ = nn::Activation<S>(arch.act);
    convs_.clear();
    conv_acts_.clear();
    for (int l = 0; l < arch.layers; ++l) {
      convs_.emplace_back(arch.out_dim, arch.out_dim, arch.kernel, 1, rng);
      conv_acts_.emplace_back(arch.act);
    }
  }

  // Frames at or after t + receptive_frames() + 1 are unaffected by a
  // change of the input at frame t (causal stack).
  int receptive_frames() const {
    int r = 0;
    for (const auto& c : convs_) r += c.receptive_frames();
    return r;
  }

  // ticks: (mel_bands x mel_ticks*T*B), tick columns grouped per
  // (frame, batch) pair. Returns (out_dim x T*B).
  nn::MatX<S> forward(const nn::MatX<S>& ticks, int T, int B) {
    check(ticks.rows() == arch_.mel_bands, "AudioEncoder: mel band count mismatch");
    check(ticks.cols() == static_cast<Eigen::Index>(arch_.mel_ticks) * T * B,
          "AudioEncoder: tick column count mismatch");
    nn::MatX<S> h = act0_.forward(tick_proj_.forward(ticks));
    h = pool_.forward(h);                  // (tick_proj x bins*T*B)
    h = nn::stack_groups(h, bins_);        // (tick_proj*bins x T*B)
    h = act1_.forward(merge_.forward(h));
    for (size_t l = 0; l < convs_.size(); ++l)
      h = conv_acts_[l].forward(convs_[l].forward(h, T, B));
    return h;
  }

  void backward(const nn::MatX<S>& dy) {
    nn::MatX<S> g = dy;
    for (size_t l = convs_.size(); l-- > 0;) {
      g = conv_acts_[l].backward(g);
      g = convs_[l].backward(g);
    }
    g = act1_.backward(g);
    g = merge_.backward(g);
    g = nn::unstack_groups(g, bins_);
    g = pool_.backward(g);
    g = act0_.backward(g);
    tick_proj_.backward(g);  // input is data; gradient discarded
  }

  void collect(std::vector<nn::ParamRef<S>>& out, const std::string& prefix) {
    tick_proj_.collect(out, prefix + ".tick_proj");
    merge_.collect(out, prefix + ".merge");
    for (size_t l = 0; l < convs_.size(); ++l)
      convs_[l].collect(out, prefix + ".conv" + std::to_string(l));
  }

 private:
  Arch arch_{};
  int bins_ = 0;
  nn::Dense<S> tick_proj_, merge_;
  nn::Activation<S> act0_, act1_;
  nn::ColumnPool<S> pool_{1};
  std::vector<nn::TemporalConv<S>> convs_;
  std::vector<nn::Activation<S>> conv_acts_;
};

template <class S>
class ExpressionEncoder {
 public:
  ExpressionEncoder() = default;
  ExpressionEncoder(int in_dim, int d, nn::Act act, Rng& rng) { init(in_dim, d, act, rng); }

  void init(int in_dim, int d, nn::Act act, Rng& rng) {
    mlp_.init({in_dim, d, d, d}, act, /*act_last=*/true, rng);
    lstm_.init(d, d, rng);
  }

  // x: (V*3 x T*B), already scaled to network units.
  nn::MatX<S> forward(const nn::MatX<S>& x, int T, int B) {
    return lstm_.forward(mlp_.forward(x), T, B);
  }

  void backward(const nn::MatX<S>& dy) { mlp_.backward(lstm_.backward(dy)); }

  void collect(std::vector<nn::ParamRef<S>>& out, const std::string& prefix) {
    mlp_.collect(out, prefix + ".mlp");
    lstm_.collect(out, prefix + ".lstm");
  }

 private:
  nn::Mlp<S> mlp_;
  nn::Lstm<S> lstm_;
};

// Full encoder trunk: pathways plus fusion. Emits (fusion_out x T*B):
// latent logits (H*C) for the categorical space, mean/logvar stacks
// (2*cont_dim) for the continuous baseline.
template <class S>
class LatentEncoder {
 public:
  LatentEncoder() = default;
  LatentEncoder(const LatentHyper& hp, Rng& rng) { init(hp, rng); }

  void init(const LatentHyper& hp, Rng& rng) {
    hp_ = hp;
    if (hp.use_audio) {
      typename AudioEncoder<S>::Arch arch{hp.mel_bands, hp.mel_ticks, hp.tick_proj,
                                          hp.tick_pool, hp.audio_layers, hp.audio_kernel,
                                          hp.d_audio, hp.act()};
      audio_.init(arch, rng);
    }
    expr_.init(hp.V * 3, hp.d_expr, hp.act(), rng);
    fusion_.init({hp.fusion_in(), hp.d_fuse, hp.d_fuse, hp.fusion_out()}, hp.act(),
                 /*act_last=*/false, rng);
  }

  AudioEncoder<S>& audio() { return audio_; }
  ExpressionEncoder<S>& expr() { return expr_; }

  nn::MatX<S> encode_audio(const nn::MatX<S>& ticks, int T, int B) {
    check(hp_.use_audio, "LatentEncoder: model was trained without an audio encoder");
    return audio_.forward(ticks, T, B);
  }

  nn::MatX<S> encode_expression(const nn::MatX<S>& mesh, int T, int B) {
    check(mesh.rows() == static_cast<Eigen::Index>(hp_.V) * 3, "LatentEncoder: V mismatch");
    return expr_.forward(mesh, T, B);
  }

  // Per-frame application; audio_emb is ignored for audio-free models.
  nn::MatX<S> fuse(const nn::MatX<S>* audio_emb, const nn::MatX<S>& expr_emb) {
    if (!hp_.use_audio) return fusion_.forward(expr_emb);
    check(audio_emb != nullptr, "LatentEncoder: audio embedding required");
    check(audio_emb->cols() == expr_emb.cols(), "LatentEncoder: embedding lengths differ");
    return fusion_.forward(nn::vstack(*audio_emb, expr_emb));
  }

  // mesh: (V*3 x T*B) in network units; ticks nullptr iff !use_audio.
  nn::MatX<S> forward(const nn::MatX<S>& mesh, const nn::MatX<S>* ticks, int T, int B) {
    nn::MatX<S> expr_emb = encode_expression(mesh, T, B);
    if (!hp_.use_audio) {
      return fusion_.forward(expr_emb);
    }
    check(ticks != nullptr, "LatentEncoder: audio features required");
    nn::MatX<S> audio_emb = audio_.forward(*ticks, T, B);
    return fusion_.forward(nn::vstack(audio_emb, expr_emb));
  }

  void backward(const nn::MatX<S>& dlogits) {
    nn::MatX<S> dfused = fusion_.backward(dlogits);
    if (!hp_.use_audio) {
      expr_.backward(dfused);
      return;
    }
    audio_.backward(dfused.topRows(hp_.d_audio));
    expr_.backward(dfused.bottomRows(hp_.d_expr));
  }

  void collect(std::vector<nn::ParamRef<S>>& out, const std::string& prefix) {
    if (hp_.use_audio) audio_.collect(out, prefix + ".audio");
    expr_.collect(out, prefix + ".expr");
    fusion_.collect(out, prefix + ".fusion");
  }

 private:
  LatentHyper hp_;
  AudioEncoder<S> audio_;
  ExpressionEncoder<S> expr_;
  nn::Mlp<S> fusion_;
};

}  // namespace speechmesh
