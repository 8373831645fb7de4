#pragma once

// Mesh decoder: animates a template from a latent code. The template is
// encoded by a three-level dense pyramid; the bottleneck concatenates
// the per-frame code feature with the deepest template feature, runs
// two forward LSTM layers, then a dense up-path adds the template
// features back at each level (additive skips). The final skip is at
// vertex level: the network emits offsets that are added to the
// template itself.

#include <Eigen/Dense>
#include <vector>

#include "speechmesh/core/check.hpp"
#include "speechmesh/core/rng.hpp"
#include "speechmesh/model/hyper.hpp"
#include "speechmesh/nn/batch.hpp"
#include "speechmesh/nn/layers.hpp"

namespace speechmesh {

// Independent linear embedding of each head's soft one-hot block.
template <class S>
class PerHeadEmbed {
 public:
  PerHeadEmbed() = default;
  PerHeadEmbed(int heads, int classes, int embed, Rng& rng) { init(heads, classes, embed, rng); }

  void init(int heads, int classes, int embed, Rng& rng) {
    H_ = heads;
    C_ = classes;
    E_ = embed;
    w_.init_normal(E_, C_ * H_, std::sqrt(1.0 / C_), rng);
    b_.init_zero(E_ * H_, 1);
  }

  // code: (H*C x N) -> (H*E x N)
  nn::MatX<S> forward(const nn::MatX<S>& code) {
    check(code.rows() == static_cast<Eigen::Index>(H_) * C_, "PerHeadEmbed: code rows != H*C");
    code_cache_ = code;
    nn::MatX<S> out(static_cast<Eigen::Index>(H_) * E_, code.cols());
    for (int h = 0; h < H_; ++h) {
      out.middleRows(h * E_, E_).noalias() =
          w_.value.middleCols(h * C_, C_) * code.middleRows(h * C_, C_);
    }
    out.colwise() += b_.value.col(0);
    return out;
  }

  nn::MatX<S> backward(const nn::MatX<S>& dy) {
    nn::MatX<S> dcode(static_cast<Eigen::Index>(H_) * C_, dy.cols());
    b_.grad.col(0).noalias() += dy.rowwise().sum();
    for (int h = 0; h < H_; ++h) {
      auto dyh = dy.middleRows(h * E_, E_);
      w_.grad.middleCols(h * C_, C_).noalias() += dyh * code_cache_.middleRows(h * C_, C_).transpose();
      dcode.middleRows(h * C_, C_).noalias() = w_.value.middleCols(h * C_, C_).transpose() * dyh;
    }
    return dcode;
  }

  void collect(std::vector<nn::ParamRef<S>>& out, const std::string& prefix) {
    w_.collect(out, prefix + ".w");
    b_.collect(out, prefix + ".b");
  }

 private:
  int H_ = 0, C_ = 0, E_ = 0;
  nn::Param<S> w_, b_;
  nn::MatX<S> code_cache_;
};

template <class S>
class MeshDecoder {
 public:
  MeshDecoder() = default;
  MeshDecoder(const LatentHyper& hp, Rng& rng) { init(hp, rng); }

  void init(const LatentHyper& hp, Rng& rng) {
    hp_ = hp;
    const int v3 = hp.V * 3;
    t1_.init(v3, hp.dec_w1, rng);
    t2_.init(hp.dec_w1, hp.dec_w2, rng);
    t3_.init(hp.dec_w2, hp.dec_w3, rng);
    embed_.init(hp.H, hp.C, hp.code_embed, rng);
    lstm1_.init(hp.code_feature_dim() + hp.dec_w3, hp.dec_lstm, rng);
    lstm2_.init(hp.dec_lstm, hp.dec_lstm, rng);
    u1_.init(hp.dec_lstm, hp.dec_w3, rng);
    u2_.init(hp.dec_w3, hp.dec_w2, rng);
    u3_.init(hp.dec_w2, hp.dec_w1, rng);
    out_.init(hp.dec_w1, v3, rng);
    for (auto* a : {&ta1_, &ta2_, &ta3_, &ua1_, &ua2_, &ua3_})
      *a = nn::Activation<S>(hp.act());
  }

  // Categorical path: code is the (H*C x T*B) soft/one-hot block.
  nn::MatX<S> forward_soft(const nn::MatX<S>& code, const nn::MatX<S>& templates_mm, int T, int B) {
    nn::MatX<S> y = forward_feature(embed_.forward(code), templates_mm, T, B);
    from_soft_ = true;
    return y;
  }

  // Continuous path: code feature supplied by the caller (same width).
  nn::MatX<S> forward_feature(const nn::MatX<S>& code_feat, const nn::MatX<S>& templates_mm,
                              int T, int B) {
    from_soft_ = false;
    check(code_feat.rows() == hp_.code_feature_dim(), "MeshDecoder: code feature width mismatch");
    check(templates_mm.rows() == static_cast<Eigen::Index>(hp_.V) * 3 && templates_mm.cols() == B,
          "MeshDecoder: template shape mismatch");
    check(code_feat.cols() == static_cast<Eigen::Index>(T) * B,
          "MeshDecoder: code length mismatch");
    T_ = T;
    B_ = B;
    templates_mm_ = templates_mm;

    nn::MatX<S> tpl = templates_mm * S(hp_.coord_scale);
    f1_ = ta1_.forward(t1_.forward(tpl));
    f2_ = ta2_.forward(t2_.forward(f1_));
    f3_ = ta3_.forward(t3_.forward(f2_));

    nn::MatX<S> x = nn::vstack(code_feat, nn::tile_frames(f3_, T));
    nn::MatX<S> h = lstm2_.forward(lstm1_.forward(x, T, B), T, B);
    nn::MatX<S> y1 = ua1_.forward(u1_.forward(h) + nn::tile_frames(f3_, T));
    nn::MatX<S> y2 = ua2_.forward(u2_.forward(y1) + nn::tile_frames(f2_, T));
    nn::MatX<S> y3 = ua3_.forward(u3_.forward(y2) + nn::tile_frames(f1_, T));
    nn::MatX<S> offsets = out_.forward(y3) * S(hp_.offset_scale);
    return offsets + nn::tile_frames(templates_mm, T);
  }

  // Returns the gradient w.r.t. the code input of the last forward
  // (soft block for forward_soft, feature for forward_feature).
  nn::MatX<S> backward(const nn::MatX<S>& dy_mm) {
    nn::MatX<S> g = out_.backward(dy_mm * S(hp_.offset_scale));

    g = ua3_.backward(g);
    nn::MatX<S> df1 = nn::sum_frames(g, T_, B_);
    g = u3_.backward(g);
    g = ua2_.backward(g);
    nn::MatX<S> df2 = nn::sum_frames(g, T_, B_);
    g = u2_.backward(g);
    g = ua1_.backward(g);
    nn::MatX<S> df3 = nn::sum_frames(g, T_, B_);
    g = u1_.backward(g);

    g = lstm1_.backward(lstm2_.backward(g));
    const int feat_dim = hp_.code_feature_dim();
    nn::MatX<S> dfeat = g.topRows(feat_dim);
    df3 += nn::sum_frames<S>(g.bottomRows(hp_.dec_w3), T_, B_);

    // Template pyramid.
    nn::MatX<S> gt = t3_.backward(ta3_.backward(df3));
    gt += df2;
    gt = t2_.backward(ta2_.backward(gt));
    gt += df1;
    t1_.backward(ta1_.backward(gt));  // template itself is data

    return from_soft_ ? embed_.backward(dfeat) : dfeat;
  }

  void collect(std::vector<nn::ParamRef<S>>& out, const std::string& prefix) {
    t1_.collect(out, prefix + ".t1");
    t2_.collect(out, prefix + ".t2");
    t3_.collect(out, prefix + ".t3");
    embed_.collect(out, prefix + ".embed");
    lstm1_.collect(out, prefix + ".lstm1");
    lstm2_.collect(out, prefix + ".lstm2");
    u1_.collect(out, prefix + ".u1");
    u2_.collect(out, prefix + ".u2");
    u3_.collect(out, prefix + ".u3");
    out_.collect(out, prefix + ".out");
  }

 private:
  LatentHyper hp_;
  int T_ = 0, B_ = 0;
  bool from_soft_ = false;
  nn::Dense<S> t1_, t2_, t3_, u1_, u2_, u3_, out_;
  nn::Activation<S> ta1_, ta2_, ta3_, ua1_, ua2_, ua3_;
  PerHeadEmbed<S> embed_;
  nn::Lstm<S> lstm1_, lstm2_;
  nn::MatX<S> f1_, f2_, f3_, templates_mm_;
};

}  // namespace speechmesh
