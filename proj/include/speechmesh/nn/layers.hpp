#pragma once

// Small reverse-mode layer zoo over Eigen matrices, templated on the
// scalar type (float for training speed, double for the finite
// difference gradient checks).
//
// Conventions:
//  - A batch of B sequences of length T is one matrix with T*B columns,
//    column index t*B + b (frame-major blocks). Dense layers ignore the
//    grouping; sequence layers (LSTM, TemporalConv) receive (T, B).
//  - forward() caches whatever backward() needs; exactly one backward()
//    per forward(). backward() accumulates parameter gradients and
//    returns the input gradient.

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "speechmesh/core/check.hpp"
#include "speechmesh/core/denormals.hpp"
#include "speechmesh/core/rng.hpp"

namespace speechmesh::nn {

template <class S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <class S>
struct ParamRef {
  std::string name;
  MatX<S>* value;
  MatX<S>* grad;
};

template <class S>
struct Param {
  MatX<S> value;
  MatX<S> grad;

  void init_zero(int rows, int cols) {
    value = MatX<S>::Zero(rows, cols);
    grad = MatX<S>::Zero(rows, cols);
  }
  void init_normal(int rows, int cols, double stddev, Rng& rng) {
    value.resize(rows, cols);
    for (int c = 0; c < cols; ++c)
      for (int r = 0; r < rows; ++r) value(r, c) = static_cast<S>(stddev * rng.normal());
    grad = MatX<S>::Zero(rows, cols);
  }
  void collect(std::vector<ParamRef<S>>& out, const std::string& name) {
    out.push_back(ParamRef<S>{name, &value, &grad});
  }
};

enum class Act { kIdentity, kLeakyRelu, kTanh };

inline const char* act_name(Act a) {
  switch (a) {
    case Act::kIdentity: return "identity";
    case Act::kLeakyRelu: return "leaky_relu";
    case Act::kTanh: return "tanh";
  }
  return "?";
}

inline Act act_from_name(const std::string& s) {
  if (s == "identity") return Act::kIdentity;
  if (s == "leaky_relu") return Act::kLeakyRelu;
  if (s == "tanh") return Act::kTanh;
  throw contract_error("unknown activation: " + s);
}

constexpr double kLeakySlope = 0.2;

template <class S>
class Activation {
 public:
  explicit Activation(Act kind = Act::kLeakyRelu) : kind_(kind) {}

  MatX<S> forward(const MatX<S>& x) {
    switch (kind_) {
      case Act::kIdentity:
        cache_ = MatX<S>();
        return x;
      case Act::kLeakyRelu: {
        cache_ = x;
        return x.unaryExpr([](S v) { return v > S(0) ? v : S(kLeakySlope) * v; });
      }
      case Act::kTanh: {
        cache_ = x.array().tanh().matrix();
        return cache_;
      }
    }
    return x;
  }

  MatX<S> backward(const MatX<S>& dy) const {
    switch (kind_) {
      case Act::kIdentity:
        return dy;
      case Act::kLeakyRelu:
        return dy.binaryExpr(cache_, [](S g, S v) { return v > S(0) ? g : S(kLeakySlope) * g; });
      case Act::kTanh:
        return (dy.array() * (S(1) - cache_.array().square())).matrix();
    }
    return dy;
  }

  Act kind() const { return kind_; }

 private:
  Act kind_;
  MatX<S> cache_;
};

template <class S>
class Dense {
 public:
  Dense() = default;
  Dense(int in, int out, Rng& rng) { init(in, out, rng); }

  void init(int in, int out, Rng& rng) {
    w_.init_normal(out, in, std::sqrt(2.0 / in), rng);
    b_.init_zero(out, 1);
  }

  int in_dim() const { return static_cast<int>(w_.value.cols()); }
  int out_dim() const { return static_cast<int>(w_.value.rows()); }

  MatX<S> forward(const MatX<S>& x) {
    check(x.rows() == w_.value.cols(), "Dense: input dim mismatch");
    x_cache_ = x;
    return (w_.value * x).colwise() + b_.value.col(0);
  }

  MatX<S> backward(const MatX<S>& dy) {
    w_.grad.noalias() += dy * x_cache_.transpose();
    b_.grad.col(0).noalias() += dy.rowwise().sum();
    return w_.value.transpose() * dy;
  }

  void collect(std::vector<ParamRef<S>>& out, const std::string& prefix) {
    w_.collect(out, prefix + ".w");
    b_.collect(out, prefix + ".b");
  }

 private:
  Param<S> w_, b_;
  MatX<S> x_cache_;
};

// Stack of Dense layers with an activation between them (and optionally
// after the last).
template <class S>
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::vector<int>& widths, Act act, bool act_last, Rng& rng) {
    init(widths, act, act_last, rng);
  }

  void init(const std::vector<int>& widths, Act act, bool act_last, Rng& rng) {
    check(widths.size() >= 2, "Mlp: need at least input and output width");
    layers_.clear();
    acts_.clear();
    for (size_t i = 0; i + 1 < widths.size(); ++i) layers_.emplace_back(widths[i], widths[i + 1], rng);
    const size_t n_acts = act_last ? layers_.size() : layers_.size() - 1;
    for (size_t i = 0; i < n_acts; ++i) acts_.emplace_back(act);
  }

  MatX<S> forward(const MatX<S>& x) {
    MatX<S> h = x;
    for (size_t i = 0; i < layers_.size(); ++i) {
      h = layers_[i].forward(h);
      if (i < acts_.size()) h = acts_[i].forward(h);
    }
    return h;
  }

  MatX<S> backward(const MatX<S>& dy) {
    MatX<S> g = dy;
    for (size_t i = layers_.size(); i-- > 0;) {
      if (i < acts_.size()) g = acts_[i].backward(g);
      g = layers_[i].backward(g);
    }
    return g;
  }

  void collect(std::vector<ParamRef<S>>& out, const std::string& prefix) {
    for (size_t i = 0; i < layers_.size(); ++i)
      layers_[i].collect(out, prefix + ".fc" + std::to_string(i));
  }

 private:
  std::vector<Dense<S>> layers_;
  std::vector<Activation<S>> acts_;
};

// Causal 1D convolution along the frame axis with one weight matrix per
// tap. Output at frame t reads input frames t - shift for each tap
// shift (all shifts >= 0); frames before the sequence start are zero.
// The standard (kernel, dilation) form has shifts 0, d, 2d, ...; the
// masked prior layers pass explicit shift lists instead.
template <class S>
class TemporalConv {
 public:
  TemporalConv() = default;
  TemporalConv(int in, int out, int kernel, int dilation, Rng& rng) {
    init(in, out, kernel, dilation, rng);
  }
  TemporalConv(int in, int out, const std::vector<int>& shifts, Rng& rng) {
    init(in, out, shifts, rng);
  }

  void init(int in, int out, int kernel, int dilation, Rng& rng) {
    std::vector<int> shifts(kernel);
    for (int j = 0; j < kernel; ++j) shifts[j] = j * dilation;
    init(in, out, shifts, rng);
  }

  void init(int in, int out, const std::vector<int>& shifts, Rng& rng) {
    check(!shifts.empty(), "TemporalConv: empty tap list");
    for (int s : shifts) check(s >= 0, "TemporalConv: taps must not look ahead");
    shifts_ = shifts;
    taps_.resize(shifts.size());
    for (auto& tap : taps_)
      tap.init_normal(out, in, std::sqrt(2.0 / (in * static_cast<double>(shifts.size()))), rng);
    b_.init_zero(out, 1);
  }

  int receptive_frames() const {
    int m = 0;
    for (int s : shifts_) m = std::max(m, s);
    return m;
  }

  MatX<S> forward(const MatX<S>& x, int T, int B) {
    check(x.cols() == static_cast<Eigen::Index>(T) * B, "TemporalConv: column count mismatch");
    x_cache_ = x;
    T_ = T;
    B_ = B;
    MatX<S> y = MatX<S>::Zero(taps_[0].value.rows(), x.cols());
    y.colwise() += b_.value.col(0);
    for (size_t j = 0; j < shifts_.size(); ++j) {
      const int shift = shifts_[j];  // frames back
      if (shift >= T) continue;
      const int cols = (T - shift) * B;
      y.rightCols(cols).noalias() += taps_[j].value * x.leftCols(cols);
    }
    return y;
  }

  MatX<S> backward(const MatX<S>& dy) {
    MatX<S> dx = MatX<S>::Zero(x_cache_.rows(), x_cache_.cols());
    b_.grad.col(0).noalias() += dy.rowwise().sum();
    for (size_t j = 0; j < shifts_.size(); ++j) {
      const int shift = shifts_[j];
      if (shift >= T_) continue;
      const int cols = (T_ - shift) * B_;
      taps_[j].grad.noalias() += dy.rightCols(cols) * x_cache_.leftCols(cols).transpose();
      dx.leftCols(cols).noalias() += taps_[j].value.transpose() * dy.rightCols(cols);
    }
    return dx;
  }

  const std::vector<int>& shifts() const { return shifts_; }
  const Param<S>& tap(size_t j) const { return taps_[j]; }
  const Param<S>& bias() const { return b_; }

  void collect(std::vector<ParamRef<S>>& out, const std::string& prefix) {
    for (size_t j = 0; j < shifts_.size(); ++j)
      taps_[j].collect(out, prefix + ".k" + std::to_string(j));
    b_.collect(out, prefix + ".b");
  }

 private:
  int T_ = 0, B_ = 0;
  std::vector<int> shifts_;
  std::vector<Param<S>> taps_;
  Param<S> b_;
  MatX<S> x_cache_;
};

// Single-layer forward-only LSTM. Gate order in the stacked weight
// matrices: input, forget, cell, output.
template <class S>
class Lstm {
 public:
  Lstm() = default;
  Lstm(int in, int hidden, Rng& rng) { init(in, hidden, rng); }

  void init(int in, int hidden, Rng& rng) {
    hidden_ = hidden;
    wx_.init_normal(4 * hidden, in, std::sqrt(1.0 / in), rng);
    wh_.init_normal(4 * hidden, hidden, std::sqrt(1.0 / hidden), rng);
    b_.init_zero(4 * hidden, 1);
    b_.value.block(hidden, 0, hidden, 1).setConstant(S(1));  // forget bias
  }

  int hidden_dim() const { return hidden_; }

  MatX<S> forward(const MatX<S>& x, int T, int B) {
    check(x.cols() == static_cast<Eigen::Index>(T) * B, "Lstm: column count mismatch");
    T_ = T;
    B_ = B;
    x_cache_ = x;
    const int h = hidden_;
    gates_.resize(4 * h, x.cols());
    c_.resize(h, x.cols());
    hst_.resize(h, x.cols());

    MatX<S> h_prev = MatX<S>::Zero(h, B);
    MatX<S> c_prev = MatX<S>::Zero(h, B);
    for (int t = 0; t < T; ++t) {
      auto xt = x.middleCols(t * B, B);
      MatX<S> pre = wx_.value * xt + wh_.value * h_prev;
      pre.colwise() += b_.value.col(0);
      auto gi = pre.topRows(h).array();
      auto gf = pre.middleRows(h, h).array();
      auto gg = pre.middleRows(2 * h, h).array();
      auto go = pre.middleRows(3 * h, h).array();
      MatX<S> i_t = (S(1) / (S(1) + (-gi).exp())).matrix();
      MatX<S> f_t = (S(1) / (S(1) + (-gf).exp())).matrix();
      MatX<S> g_t = gg.tanh().matrix();
      MatX<S> o_t = (S(1) / (S(1) + (-go).exp())).matrix();
      MatX<S> c_t = (f_t.array() * c_prev.array() + i_t.array() * g_t.array()).matrix();
      MatX<S> h_t = (o_t.array() * c_t.array().tanh()).matrix();

      gates_.block(0, t * B, h, B) = i_t;
      gates_.block(h, t * B, h, B) = f_t;
      gates_.block(2 * h, t * B, h, B) = g_t;
      gates_.block(3 * h, t * B, h, B) = o_t;
      c_.middleCols(t * B, B) = c_t;
      hst_.middleCols(t * B, B) = h_t;
      h_prev = std::move(h_t);
      c_prev = std::move(c_t);
    }
    return hst_;
  }

  MatX<S> backward(const MatX<S>& dh_out) {
    const int h = hidden_;
    MatX<S> dx = MatX<S>::Zero(x_cache_.rows(), x_cache_.cols());
    MatX<S> dh_next = MatX<S>::Zero(h, B_);
    MatX<S> dc_next = MatX<S>::Zero(h, B_);
    for (int t = T_ - 1; t >= 0; --t) {
      MatX<S> dh = dh_out.middleCols(t * B_, B_) + dh_next;
      auto i_t = gates_.block(0, t * B_, h, B_).array();
      auto f_t = gates_.block(h, t * B_, h, B_).array();
      auto g_t = gates_.block(2 * h, t * B_, h, B_).array();
      auto o_t = gates_.block(3 * h, t * B_, h, B_).array();
      auto c_t = c_.middleCols(t * B_, B_).array();
      const auto tanh_c = c_t.tanh();

      MatX<S> dc = (dh.array() * o_t * (S(1) - tanh_c.square())).matrix() + dc_next;
      MatX<S> do_ = (dh.array() * tanh_c * o_t * (S(1) - o_t)).matrix();
      MatX<S> di = (dc.array() * g_t * i_t * (S(1) - i_t)).matrix();
      MatX<S> dg = (dc.array() * i_t * (S(1) - g_t.square())).matrix();
      MatX<S> df;
      if (t > 0) {
        auto c_prev = c_.middleCols((t - 1) * B_, B_).array();
        df = (dc.array() * c_prev * f_t * (S(1) - f_t)).matrix();
      } else {
        df = MatX<S>::Zero(h, B_);
      }

      MatX<S> dpre(4 * h, B_);
      dpre.topRows(h) = di;
      dpre.middleRows(h, h) = df;
      dpre.middleRows(2 * h, h) = dg;
      dpre.middleRows(3 * h, h) = do_;

      auto xt = x_cache_.middleCols(t * B_, B_);
      wx_.grad.noalias() += dpre * xt.transpose();
      if (t > 0) {
        auto h_prev = hst_.middleCols((t - 1) * B_, B_);
        wh_.grad.noalias() += dpre * h_prev.transpose();
      }
      b_.grad.col(0).noalias() += dpre.rowwise().sum();

      dx.middleCols(t * B_, B_).noalias() = wx_.value.transpose() * dpre;
      dh_next.noalias() = wh_.value.transpose() * dpre;
      dc_next = (dc.array() * f_t).matrix();
    }
    return dx;
  }

  void collect(std::vector<ParamRef<S>>& out, const std::string& prefix) {
    wx_.collect(out, prefix + ".wx");
    wh_.collect(out, prefix + ".wh");
    b_.collect(out, prefix + ".b");
  }

 private:
  int hidden_ = 0, T_ = 0, B_ = 0;
  Param<S> wx_, wh_, b_;
  MatX<S> x_cache_, gates_, c_, hst_;
};

// Mean-pool groups of `group` consecutive columns into one (used to
// reduce the per-visual-frame mel ticks before the temporal stack).
template <class S>
class ColumnPool {
 public:
  explicit ColumnPool(int group = 1) : group_(group) {}

  // x: (rows x group*N) -> stacked output: (rows*? ) Actually pools along
  // columns: output column n = mean of input columns [n*group, (n+1)*group).
  MatX<S> forward(const MatX<S>& x) {
    check(x.cols() % group_ == 0, "ColumnPool: column count not divisible by group");
    in_cols_ = static_cast<int>(x.cols());
    const int n = in_cols_ / group_;
    MatX<S> y = MatX<S>::Zero(x.rows(), n);
    for (int j = 0; j < group_; ++j) {
      for (int c = 0; c < n; ++c) y.col(c) += x.col(c * group_ + j);
    }
    return y / S(group_);
  }

  MatX<S> backward(const MatX<S>& dy) const {
    MatX<S> dx(dy.rows(), in_cols_);
    for (Eigen::Index c = 0; c < dy.cols(); ++c)
      for (int j = 0; j < group_; ++j) dx.col(c * group_ + j) = dy.col(c) / S(group_);
    return dx;
  }

 private:
  int group_;
  int in_cols_ = 0;
};

// Softmax cross-entropy over columns; targets are per-column class ids.
template <class S>
struct SoftmaxXent {
  // Returns mean cross-entropy; writes dlogits (already divided by N).
  static double loss_and_grad(const MatX<S>& logits, const std::vector<int>& targets,
                              MatX<S>* dlogits) {
    const int C = static_cast<int>(logits.rows());
    const int N = static_cast<int>(logits.cols());
    check(static_cast<int>(targets.size()) == N, "SoftmaxXent: target count mismatch");
    if (dlogits) dlogits->resize(C, N);
    double total = 0.0;
    for (int n = 0; n < N; ++n) {
      const auto col = logits.col(n);
      const S mx = col.maxCoeff();
      VecX<S> e = (col.array() - mx).exp().matrix();
      const S z = e.sum();
      const int tgt = targets[n];
      check(tgt >= 0 && tgt < C, "SoftmaxXent: target out of range");
      total += -static_cast<double>(col(tgt) - mx) + std::log(static_cast<double>(z));
      if (dlogits) {
        dlogits->col(n) = e / z;
        (*dlogits)(tgt, n) -= S(1);
        dlogits->col(n) /= S(N);
      }
    }
    return total / N;
  }
};

class Adam {
 public:
  struct Settings {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam() = default;
  explicit Adam(const Settings& s) : s_(s) {}

  template <class S>
  void step(std::vector<ParamRef<S>>& params) {
    if (m_.empty()) {
      for (auto& p : params) {
        m_.push_back(Eigen::MatrixXd::Zero(p.value->rows(), p.value->cols()));
        v_.push_back(Eigen::MatrixXd::Zero(p.value->rows(), p.value->cols()));
      }
    }
    check(m_.size() == params.size(), "Adam: parameter set changed between steps");
    ++t_;
    const double bc1 = 1.0 - std::pow(s_.beta1, t_);
    const double bc2 = 1.0 - std::pow(s_.beta2, t_);
    for (size_t i = 0; i < params.size(); ++i) {
      const Eigen::MatrixXd g = params[i].grad->template cast<double>();
      m_[i] = s_.beta1 * m_[i] + (1.0 - s_.beta1) * g;
      v_[i] = s_.beta2 * v_[i] + (1.0 - s_.beta2) * g.cwiseProduct(g);
      const Eigen::MatrixXd update =
          (m_[i] / bc1).array() / ((v_[i] / bc2).array().sqrt() + s_.eps);
      *params[i].value -= (s_.lr * update).cast<S>();
    }
  }

  const Settings& settings() const { return s_; }
  void set_lr(double lr) { s_.lr = lr; }

 private:
  Settings s_;
  long t_ = 0;
  std::vector<Eigen::MatrixXd> m_, v_;
};

template <class S>
inline void zero_grads(std::vector<ParamRef<S>>& params) {
  for (auto& p : params) p.grad->setZero();
}

template <class S>
inline size_t param_count(const std::vector<ParamRef<S>>& params) {
  size_t n = 0;
  for (const auto& p : params) n += static_cast<size_t>(p.value->size());
  return n;
}

}  // namespace speechmesh::nn
