#pragma once

// Audio-conditioned autoregressive prior over the categorical latent
// space, factorized position by position in raster order (frame-major,
// heads fastest):
//
//   p(c | a) = prod_t prod_h p(c_{t,h} | c_{<t,1:H}, c_{t,<h}, a_{<=t})
//
// Positions are flattened to a single axis (flat index t*H + h); any
// strictly-backward tap on that axis is inside the allowed context, so
// causality is structural rather than enforced by weight masking:
//  - layer 1 taps the H immediately preceding positions (never the
//    current one),
//  - layers 2..4 tap the current position plus whole frames 1x and 2x
//    the time dilation (2, 4, 8) back,
//  - audio enters layers 2..4 as a per-frame conditioning term computed
//    by a causal audio encoder, so position (t,h) sees a_{<=t} only.
//
// The same recurrence runs two ways: a batched teacher-forced pass for
// training/perplexity, and an incremental per-position pass for
// ancestral sampling. They agree to float round-off.

#include <Eigen/Dense>
#include <fstream>
#include <utility>
#include <vector>

#include "speechmesh/audio/mel.hpp"
#include "speechmesh/core/check.hpp"
#include "speechmesh/core/rng.hpp"
#include "speechmesh/model/checkpoint.hpp"
#include "speechmesh/model/encoder.hpp"
#include "speechmesh/model/hyper.hpp"
#include "speechmesh/model/latent_code.hpp"
#include "speechmesh/nn/batch.hpp"
#include "speechmesh/nn/layers.hpp"

namespace speechmesh {

// Positions (0-based) the prediction at (t, h) may depend on:
// every head of every earlier frame plus the earlier heads of frame t.
inline std::vector<std::pair<int, int>> visible_context(int t, int h, int T, int H) {
  check(T >= 1 && H >= 1, "visible_context: degenerate shape");
  check(t >= 0 && t < T && h >= 0 && h < H, "visible_context: position out of range");
  std::vector<std::pair<int, int>> ctx;
  ctx.reserve(static_cast<size_t>(t) * H + h);
  for (int tp = 0; tp < t; ++tp)
    for (int hp = 0; hp < H; ++hp) ctx.emplace_back(tp, hp);
  for (int hp = 0; hp < h; ++hp) ctx.emplace_back(t, hp);
  return ctx;
}

struct PerplexityResult {
  double pp = 0.0;
  int clamped_positions = 0;  // positions clamped at probability 1e-12
};

template <class S>
class PriorModel {
 public:
  PriorModel() = default;
  PriorModel(const PriorHyper& hp, uint64_t init_seed) { init(hp, init_seed); }

  void init(const PriorHyper& hp, uint64_t init_seed) {
    hp.validate();
    hp_ = hp;
    Rng rng = Rng(init_seed).child("prior_init");
    typename AudioEncoder<S>::Arch arch{hp.mel_bands,  hp.mel_ticks,  hp.cond_tick_proj,
                                        hp.cond_tick_pool, hp.cond_layers, hp.cond_kernel,
                                        hp.cond_dim,   hp.act()};
    cond_.init(arch, rng);

    embed_w_.init_normal(hp.embed, hp.C, 1.0 / std::sqrt(static_cast<double>(hp.embed)), rng);
    embed_b_.init_zero(hp.embed, 1);

    std::vector<int> shifts1(hp.H);
    for (int j = 0; j < hp.H; ++j) shifts1[j] = j + 1;
    l1_.init(hp.embed, hp.width, shifts1, rng);
    l2_.init(hp.width, hp.width, {0, hp.H * hp.dil2, 2 * hp.H * hp.dil2}, rng);
    l3_.init(hp.width, hp.width, {0, hp.H * hp.dil3, 2 * hp.H * hp.dil3}, rng);
    l4_.init(hp.width, hp.width, {0, hp.H * hp.dil4, 2 * hp.H * hp.dil4}, rng);
    c2_.init(hp.cond_dim, hp.width, rng);
    c3_.init(hp.cond_dim, hp.width, rng);
    c4_.init(hp.cond_dim, hp.width, rng);
    head_.init(hp.width, hp.C, rng);
    for (auto* a : {&a1_, &a2_, &a3_, &a4_}) *a = nn::Activation<S>(hp.act());
  }

  const PriorHyper& hyper() const { return hp_; }

  std::vector<nn::ParamRef<S>> collect() {
    std::vector<nn::ParamRef<S>> params;
    cond_.collect(params, "prior.cond");
    embed_w_.collect(params, "prior.embed.w");
    embed_b_.collect(params, "prior.embed.b");
    l1_.collect(params, "prior.l1");
    l2_.collect(params, "prior.l2");
    l3_.collect(params, "prior.l3");
    l4_.collect(params, "prior.l4");
    c2_.collect(params, "prior.c2");
    c3_.collect(params, "prior.c3");
    c4_.collect(params, "prior.c4");
    head_.collect(params, "prior.head");
    return params;
  }

  // Teacher-forced logits at every position in one pass.
  // labels: (H x T*B) with column layout t*B+b; ticks: mel tick matrix
  // for the same crops. Returns (C x T*H*B), position-major.
  nn::MatX<S> forward_logits(const Eigen::MatrixXi& labels, const nn::MatX<S>& ticks, int T,
                             int B) {
    check(labels.rows() == hp_.H && labels.cols() == static_cast<Eigen::Index>(T) * B,
          "PriorModel: label shape mismatch");
    T_ = T;
    B_ = B;
    labels_cache_ = labels;

    // Code embeddings per position.
    nn::MatX<S> z0(hp_.embed, static_cast<Eigen::Index>(T) * hp_.H * B);
    for (int t = 0; t < T; ++t)
      for (int h = 0; h < hp_.H; ++h)
        for (int b = 0; b < B; ++b) {
          const int c = labels(h, static_cast<Eigen::Index>(t) * B + b);
          check(c >= 0 && c < hp_.C, "PriorModel: label out of range");
          z0.col((static_cast<Eigen::Index>(t) * hp_.H + h) * B + b) =
              embed_w_.value.col(c) + embed_b_.value.col(0);
        }

    nn::MatX<S> cond = cond_.forward(ticks, T, B);
    cond_pos_cache_ = nn::tile_positions(cond, T, hp_.H, B);

    const int P = T * hp_.H;
    nn::MatX<S> h1 = a1_.forward(l1_.forward(z0, P, B));
    nn::MatX<S> h2 = a2_.forward(l2_.forward(h1, P, B) + c2_.forward(cond_pos_cache_));
    nn::MatX<S> h3 = a3_.forward(l3_.forward(h2, P, B) + c3_.forward(cond_pos_cache_));
    nn::MatX<S> h4 = a4_.forward(l4_.forward(h3, P, B) + c4_.forward(cond_pos_cache_));
    return head_.forward(h4);
  }

  void backward(const nn::MatX<S>& dlogits) {
    nn::MatX<S> g = head_.backward(dlogits);
    nn::MatX<S> dcond_pos = nn::MatX<S>::Zero(hp_.cond_dim, g.cols());

    g = a4_.backward(g);
    dcond_pos += c4_.backward(g);
    g = l4_.backward(g);
    g = a3_.backward(g);
    dcond_pos += c3_.backward(g);
    g = l3_.backward(g);
    g = a2_.backward(g);
    dcond_pos += c2_.backward(g);
    g = l2_.backward(g);
    g = a1_.backward(g);
    nn::MatX<S> dz0 = l1_.backward(g);

    for (int t = 0; t < T_; ++t)
      for (int h = 0; h < hp_.H; ++h)
        for (int b = 0; b < B_; ++b) {
          const Eigen::Index p = (static_cast<Eigen::Index>(t) * hp_.H + h) * B_ + b;
          const int c = labels_cache_(h, static_cast<Eigen::Index>(t) * B_ + b);
          embed_w_.grad.col(c) += dz0.col(p);
          embed_b_.grad.col(0) += dz0.col(p);
        }

    cond_.backward(nn::sum_positions(dcond_pos, T_, hp_.H, B_));
  }

  // Single-sequence convenience: logits (C x T*H) from a code.
  Eigen::MatrixXf logits(const LatentCode& code, const AudioFeatures& features) {
    check(code.heads() == hp_.H && code.C == hp_.C, "PriorModel: code (H,C) mismatch");
    check(features.num_frames == code.num_frames(), "PriorModel: audio/code length mismatch");
    nn::MatX<S> ticks = features_ticks(features);
    nn::MatX<S> out = forward_logits(code.labels, ticks, code.num_frames(), 1);
    return out.template cast<float>();
  }

  // Ancestral sampling in raster order; tau_s tempers each step's
  // categorical distribution. Deterministic given the seed. When
  // step_logits is non-null it receives the (C x T*H) logits used at
  // each sampling step (these match a teacher-forced pass over the
  // sampled code up to float round-off).
  LatentCode sample(const AudioFeatures& features, uint64_t seed, double tau_s = 1.0,
                    Eigen::MatrixXf* step_logits = nullptr) {
    check(tau_s > 0.0, "PriorModel: sampling temperature must be > 0");
    const int T = features.num_frames;
    const int H = hp_.H;
    const int W = hp_.width;
    Rng rng = Rng(seed).child("prior_sample");

    nn::MatX<S> ticks = features_ticks(features);
    nn::MatX<S> cond = cond_.forward(ticks, T, 1);  // (cond_dim x T)
    nn::MatX<S> cond2 = c2_.forward(cond);
    nn::MatX<S> cond3 = c3_.forward(cond);
    nn::MatX<S> cond4 = c4_.forward(cond);

    const int P = T * H;
    nn::MatX<S> z0 = nn::MatX<S>::Zero(hp_.embed, P);
    nn::MatX<S> h1(W, P), h2(W, P), h3(W, P), h4(W, P);
    Eigen::MatrixXi labels(H, T);
    if (step_logits) step_logits->resize(hp_.C, P);

    nn::Activation<S> act(hp_.act());
    auto act1 = [&](const nn::VecX<S>& v) {
      nn::MatX<S> m = v;
      return nn::VecX<S>(act.forward(m).col(0));
    };

    auto layer_at = [&](nn::TemporalConv<S>& layer, const nn::MatX<S>& input, int p) {
      nn::VecX<S> pre = layer.bias().value.col(0);
      const auto& shifts = layer.shifts();
      for (size_t j = 0; j < shifts.size(); ++j) {
        const int q = p - shifts[j];
        if (q < 0) continue;
        pre.noalias() += layer.tap(j).value * input.col(q);
      }
      return pre;
    };

    for (int p = 0; p < P; ++p) {
      const int t = p / H;
      const int h = p % H;
      h1.col(p) = act1(layer_at(l1_, z0, p));
      h2.col(p) = act1(layer_at(l2_, h1, p) + cond2.col(t));
      h3.col(p) = act1(layer_at(l3_, h2, p) + cond3.col(t));
      h4.col(p) = act1(layer_at(l4_, h3, p) + cond4.col(t));
      nn::VecX<S> lg = (head_.forward(nn::MatX<S>(h4.col(p)))).col(0);
      if (step_logits) step_logits->col(p) = lg.template cast<float>();

      // Tempered categorical draw by inverse CDF.
      Eigen::VectorXd probs = lg.template cast<double>() / tau_s;
      probs.array() -= probs.maxCoeff();
      probs = probs.array().exp().matrix();
      probs /= probs.sum();
      const double u = rng.uniform();
      double cum = 0.0;
      int c = hp_.C - 1;
      for (int k = 0; k < hp_.C; ++k) {
        cum += probs(k);
        if (u <= cum) {
          c = k;
          break;
        }
      }
      labels(h, t) = c;
      z0.col(p) = embed_w_.value.col(c) + embed_b_.value.col(0);
    }
    return LatentCode::from_labels(labels, hp_.C);
  }

  // PP = exp(mean cross-entropy). Position probabilities are floored at
  // 1e-12; the result reports how many positions hit the floor.
  PerplexityResult perplexity(const LatentCode& code, const AudioFeatures& features) {
    const Eigen::MatrixXf lg = logits(code, features);
    PerplexityResult res;
    double total = 0.0;
    const int T = code.num_frames();
    for (int t = 0; t < T; ++t)
      for (int h = 0; h < hp_.H; ++h) {
        const auto col = lg.col(static_cast<Eigen::Index>(t) * hp_.H + h);
        const float mx = col.maxCoeff();
        const double z = (col.array() - mx).template cast<double>().exp().sum();
        double logp = static_cast<double>(col(code.labels(h, t)) - mx) - std::log(z);
        if (logp < std::log(1e-12)) {
          logp = std::log(1e-12);
          ++res.clamped_positions;
        }
        total += -logp;
      }
    res.pp = std::exp(total / (static_cast<double>(T) * hp_.H));
    return res;
  }

  Checkpoint to_checkpoint() {
    Checkpoint c;
    c.kind = "prior";
    hp_.to_checkpoint(c);
    auto params = collect();
    for (const auto& p : params) {
      Checkpoint::Blob b;
      b.name = p.name;
      b.dims = {static_cast<uint32_t>(p.value->rows()), static_cast<uint32_t>(p.value->cols())};
      b.data.resize(p.value->size());
      Eigen::Map<Eigen::MatrixXf>(b.data.data(), p.value->rows(), p.value->cols()) =
          p.value->template cast<float>();
      c.blobs.push_back(std::move(b));
    }
    return c;
  }

  static PriorModel from_checkpoint(const Checkpoint& c) {
    check(c.kind == "prior",
          "from_checkpoint: expected a prior checkpoint, got \"" + c.kind + "\"");
    PriorModel m;
    m.init(PriorHyper::from_checkpoint(c), 0);
    auto params = m.collect();
    for (auto& p : params) {
      const Checkpoint::Blob& b = c.blob(p.name);
      check_io(b.dims.size() == 2 && b.dims[0] == static_cast<uint32_t>(p.value->rows()) &&
                   b.dims[1] == static_cast<uint32_t>(p.value->cols()),
               "checkpoint blob \"" + p.name + "\": shape mismatch");
      *p.value = Eigen::Map<const Eigen::MatrixXf>(b.data.data(), b.dims[0], b.dims[1])
                     .template cast<S>();
    }
    return m;
  }

 private:
  nn::MatX<S> features_ticks(const AudioFeatures& f) const {
    check(f.ticks == hp_.mel_ticks && f.bands == hp_.mel_bands,
          "PriorModel: audio feature shape mismatch");
    nn::MatX<S> m(f.bands, static_cast<Eigen::Index>(f.ticks) * f.num_frames);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (int b = 0; b < f.bands; ++b) m(b, j) = static_cast<S>(f.data[j * f.bands + b]);
    return m;
  }

  PriorHyper hp_;
  int T_ = 0, B_ = 0;
  AudioEncoder<S> cond_;
  nn::Param<S> embed_w_, embed_b_;
  nn::TemporalConv<S> l1_, l2_, l3_, l4_;
  nn::Dense<S> c2_, c3_, c4_, head_;
  nn::Activation<S> a1_, a2_, a3_, a4_;
  Eigen::MatrixXi labels_cache_;
  nn::MatX<S> cond_pos_cache_;
};

using PriorModelF = PriorModel<float>;

}  // namespace speechmesh
