#pragma once

// Gumbel-softmax categorization over each latent head.
//
// Sampling draws u = logits/tau + g with iid Gumbel(0,1) noise g, then
// soft = softmax(u). The hard sample distribution is therefore
// softmax(logits/tau): tau tempers how sharply the sampler commits, and
// as tau -> 0 sampling coincides with argmax. sample_hard emits exact
// one-hots and routes gradients through the relaxed soft sample
// (straight-through); argmax is deterministic and noise free.

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "speechmesh/core/check.hpp"
#include "speechmesh/core/rng.hpp"
#include "speechmesh/nn/layers.hpp"

namespace speechmesh::nn {

enum class CategorizeMode { kSampleSoft, kSampleHard, kArgmax };

template <class S>
class GumbelHeads {
 public:
  GumbelHeads(int heads, int classes) : H_(heads), C_(classes) {}

  // logits: (H*C x N). Returns the code values fed downstream:
  // soft samples, straight-through hard one-hots, or argmax one-hots.
  MatX<S> forward(const MatX<S>& logits, double tau, CategorizeMode mode, Rng* rng) {
    check(logits.rows() == static_cast<Eigen::Index>(H_) * C_, "GumbelHeads: logit rows != H*C");
    check(logits.allFinite(), "GumbelHeads: non-finite logits");
    const bool sampling = mode != CategorizeMode::kArgmax;
    check(!sampling || tau > 0.0, "GumbelHeads: tau must be > 0 for sampling");
    check(!sampling || rng != nullptr, "GumbelHeads: sampling requires an rng");

    const Eigen::Index N = logits.cols();
    mode_ = mode;
    tau_ = tau;
    labels_.resize(H_, N);
    MatX<S> out(logits.rows(), N);
    if (sampling) soft_.resize(logits.rows(), N);

    for (Eigen::Index n = 0; n < N; ++n) {
      for (int h = 0; h < H_; ++h) {
        auto block = logits.col(n).segment(h * C_, C_);
        if (mode == CategorizeMode::kArgmax) {
          Eigen::Index arg;
          block.maxCoeff(&arg);
          labels_(h, n) = static_cast<int>(arg);
          out.col(n).segment(h * C_, C_).setZero();
          out(h * C_ + arg, n) = S(1);
          continue;
        }
        VecX<S> u(C_);
        for (int c = 0; c < C_; ++c)
          u(c) = block(c) / S(tau) + static_cast<S>(rng->gumbel());
        Eigen::Index arg;
        const S mx = u.maxCoeff(&arg);
        VecX<S> e = (u.array() - mx).exp().matrix();
        e /= e.sum();
        soft_.col(n).segment(h * C_, C_) = e;
        labels_(h, n) = static_cast<int>(arg);
        if (mode == CategorizeMode::kSampleSoft) {
          out.col(n).segment(h * C_, C_) = e;
        } else {
          out.col(n).segment(h * C_, C_).setZero();
          out(h * C_ + arg, n) = S(1);
        }
      }
    }
    return out;
  }

  // Straight-through: gradients w.r.t. the emitted code are treated as
  // gradients w.r.t. the relaxed soft sample, then taken back through
  // softmax(logits/tau + g).
  MatX<S> backward(const MatX<S>& dy) const {
    check(mode_ != CategorizeMode::kArgmax, "GumbelHeads: argmax mode has no gradient");
    MatX<S> dlogits(dy.rows(), dy.cols());
    for (Eigen::Index n = 0; n < dy.cols(); ++n) {
      for (int h = 0; h < H_; ++h) {
        auto s = soft_.col(n).segment(h * C_, C_);
        auto g = dy.col(n).segment(h * C_, C_);
        const S dot = s.dot(g);
        dlogits.col(n).segment(h * C_, C_) =
            (s.array() * (g.array() - dot)).matrix() / S(tau_);
      }
    }
    return dlogits;
  }

  const Eigen::MatrixXi& labels() const { return labels_; }
  const MatX<S>& soft() const { return soft_; }
  int heads() const { return H_; }
  int classes() const { return C_; }

 private:
  int H_, C_;
  CategorizeMode mode_ = CategorizeMode::kArgmax;
  double tau_ = 1.0;
  Eigen::MatrixXi labels_;
  MatX<S> soft_;
};

}  // namespace speechmesh::nn
