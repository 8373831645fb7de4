#pragma once

// Prior training: teacher forcing on codes produced by a frozen trained
// encoder, cross-entropy over the categorical labels (or Gaussian NLL
// for the continuous baseline).

#include <fstream>
#include <vector>

#include "speechmesh/model/latent_model.hpp"
#include "speechmesh/prior/prior.hpp"
#include "speechmesh/synth/dataset.hpp"

namespace speechmesh {

struct EncodedSequence {
  Eigen::MatrixXi labels;  // H x T (categorical)
  Eigen::MatrixXf z;       // cont_dim x T (continuous)
  const AudioFeatures* features = nullptr;
};

// Encode a dataset split with the frozen latent model (argmax labels /
// posterior means).
inline std::vector<EncodedSequence> encode_dataset(LatentModelF& model, const LoadedDataset& ds,
                                                   const std::string& split) {
  const std::vector<int> idx = ds.sequence_indices(split);
  check(!idx.empty(), "encode_dataset: empty split \"" + split + "\"");
  std::vector<EncodedSequence> out;
  out.reserve(idx.size());
  for (int i : idx) {
    const LoadedSequence& s = ds.sequences[i];
    EncodedSequence e;
    e.features = &s.features;
    const AudioFeatures* a = model.hyper().use_audio ? &s.features : nullptr;
    if (model.hyper().latent == LatentKind::kCategorical) {
      e.labels = model.encode(s.meshes, a).labels;
    } else {
      e.z = model.encode_mean(s.meshes, a);
    }
    out.push_back(std::move(e));
  }
  return out;
}

struct PriorTrainConfig {
  PriorHyper hyper;
  int steps = 800;
  int batch = 4;
  int crop_frames = 32;
  double lr = 1e-3;
  uint64_t seed = 0;
  std::string log_path;
};

struct PriorTrainResult {
  PriorModelF model;
  double final_loss = 0.0;
  std::vector<double> loss_curve;
};

inline PriorTrainResult train_prior(PriorTrainConfig cfg, const std::vector<EncodedSequence>& data) {
  using S = float;
  check(!data.empty(), "train_prior: empty encoded dataset");
  check(data.front().labels.size() > 0,
        "train_prior: dataset has no categorical labels (encoder checkpoint missing or continuous)");
  cfg.hyper.latent = LatentKind::kCategorical;
  cfg.hyper.validate();
  const int H = cfg.hyper.H;
  for (const auto& e : data)
    check(e.labels.rows() == H && e.features != nullptr, "train_prior: encoded sequence mismatch");

  PriorTrainResult result;
  result.model.init(cfg.hyper, cfg.seed);
  auto params = result.model.collect();
  nn::Adam adam({cfg.lr, 0.9, 0.999, 1e-8});
  Rng rng_data = Rng(cfg.seed).child("prior_data");

  const int B = cfg.batch;
  std::ofstream log;
  if (!cfg.log_path.empty()) {
    log.open(cfg.log_path);
    check_io(log.good(), "train_prior: cannot open log file " + cfg.log_path);
  }

  for (int step = 0; step < cfg.steps; ++step) {
    const int T = cfg.crop_frames;
    Eigen::MatrixXi labels(H, static_cast<Eigen::Index>(T) * B);
    nn::MatX<S> ticks(cfg.hyper.mel_bands,
                      static_cast<Eigen::Index>(cfg.hyper.mel_ticks) * T * B);
    for (int b = 0; b < B; ++b) {
      const EncodedSequence& e = data[rng_data.uniform_index(data.size())];
      const int len = static_cast<int>(e.labels.cols());
      check(len >= 1, "train_prior: empty sequence");
      const int t0 = len > T ? static_cast<int>(rng_data.uniform_index(len - T + 1)) : 0;
      for (int t = 0; t < T; ++t) {
        const int src = std::min(t0 + t, len - 1);
        for (int h = 0; h < H; ++h) labels(h, static_cast<Eigen::Index>(t) * B + b) = e.labels(h, src);
        for (int f = 0; f < cfg.hyper.mel_ticks; ++f) {
          const Eigen::Index col = (static_cast<Eigen::Index>(t) * B + b) * cfg.hyper.mel_ticks + f;
          for (int m = 0; m < cfg.hyper.mel_bands; ++m)
            ticks(m, col) = e.features->at(src, f, m);
        }
      }
    }

    nn::zero_grads(params);
    nn::MatX<S> logits = result.model.forward_logits(labels, ticks, T, B);
    std::vector<int> targets(static_cast<size_t>(T) * H * B);
    for (int t = 0; t < T; ++t)
      for (int h = 0; h < H; ++h)
        for (int b = 0; b < B; ++b)
          targets[(static_cast<size_t>(t) * H + h) * B + b] =
              labels(h, static_cast<Eigen::Index>(t) * B + b);
    nn::MatX<S> dlogits;
    const double ce = nn::SoftmaxXent<S>::loss_and_grad(logits, targets, &dlogits);
    if (!std::isfinite(ce))
      throw contract_error("train_prior: loss diverged (non-finite) at step " +
                           std::to_string(step));
    result.model.backward(dlogits);
    adam.step(params);

    result.loss_curve.push_back(ce);
    result.final_loss = ce;
    if (log.is_open()) log << "step " << step << " ce " << ce << "\n";
  }
  return result;
}

// ---------------------------------------------------------------------------
// Continuous baseline prior: predicts per-frame mean/variance of the
// next continuous latent from past latents and causal audio.
// ---------------------------------------------------------------------------

template <class S>
class ContinuousPrior {
 public:
  ContinuousPrior() = default;
  ContinuousPrior(const PriorHyper& hp, uint64_t init_seed) { init(hp, init_seed); }

  void init(const PriorHyper& hp, uint64_t init_seed) {
    hp_ = hp;
    Rng rng = Rng(init_seed).child("cont_prior_init");
    typename AudioEncoder<S>::Arch arch{hp.mel_bands,  hp.mel_ticks,  hp.cond_tick_proj,
                                        hp.cond_tick_pool, hp.cond_layers, hp.cond_kernel,
                                        hp.cond_dim,   hp.act()};
    cond_.init(arch, rng);
    in_z_.init(hp.cont_dim, hp.width, rng);
    in_c_.init(hp.cond_dim, hp.width, rng);
    act0_ = nn::Activation<S>(hp.act());
    const int dils[4] = {1, hp.dil2, hp.dil3, hp.dil4};
    convs_.clear();
    acts_.clear();
    for (int l = 0; l < 4; ++l) {
      convs_.emplace_back(hp.width, hp.width, 2, dils[l], rng);
      acts_.emplace_back(hp.act());
    }
    head_.init(hp.width, 2 * hp.cont_dim, rng);
  }

  const PriorHyper& hyper() const { return hp_; }

  std::vector<nn::ParamRef<S>> collect() {
    std::vector<nn::ParamRef<S>> params;
    cond_.collect(params, "cprior.cond");
    in_z_.collect(params, "cprior.in_z");
    in_c_.collect(params, "cprior.in_c");
    for (size_t l = 0; l < convs_.size(); ++l)
      convs_[l].collect(params, "cprior.conv" + std::to_string(l));
    head_.collect(params, "cprior.head");
    return params;
  }

  // stats (2L x T*B) from teacher-forced latents z (L x T*B).
  nn::MatX<S> forward_stats(const nn::MatX<S>& z, const nn::MatX<S>& ticks, int T, int B) {
    check(z.rows() == hp_.cont_dim, "ContinuousPrior: latent width mismatch");
    // Previous-frame latents as input; zeros at t=0.
    nn::MatX<S> z_prev = nn::MatX<S>::Zero(z.rows(), z.cols());
    if (T > 1)
      z_prev.rightCols(static_cast<Eigen::Index>(T - 1) * B) =
          z.leftCols(static_cast<Eigen::Index>(T - 1) * B);
    nn::MatX<S> x = act0_.forward(in_z_.forward(z_prev) + in_c_.forward(cond_.forward(ticks, T, B)));
    for (size_t l = 0; l < convs_.size(); ++l) x = acts_[l].forward(convs_[l].forward(x, T, B));
    nn::MatX<S> stats = head_.forward(x);
    stats.bottomRows(hp_.cont_dim) =
        stats.bottomRows(hp_.cont_dim).cwiseMax(S(-10)).cwiseMin(S(6));
    return stats;
  }

  void backward(const nn::MatX<S>& dstats) {
    nn::MatX<S> g = head_.backward(dstats);
    for (size_t l = convs_.size(); l-- > 0;) {
      g = acts_[l].backward(g);
      g = convs_[l].backward(g);
    }
    g = act0_.backward(g);
    in_z_.backward(g);  // teacher-forced input is data
    cond_.backward(in_c_.backward(g));
  }

  // Mean Gaussian NLL per latent element; fills dstats for backward().
  static double nll(const nn::MatX<S>& stats, const nn::MatX<S>& z, nn::MatX<S>* dstats) {
    const int L = static_cast<int>(z.rows());
    const auto mean = stats.topRows(L).array().template cast<double>();
    const auto logvar = stats.bottomRows(L).array().template cast<double>();
    const auto target = z.array().template cast<double>();
    const auto inv_var = (-logvar).exp();
    const auto diff = target - mean;
    const double n = static_cast<double>(z.size());
    const double loss =
        0.5 * (diff.square() * inv_var + logvar + std::log(2.0 * M_PI)).sum() / n;
    if (dstats) {
      dstats->resize(stats.rows(), stats.cols());
      dstats->topRows(L) = ((mean - target) * inv_var / n).template cast<S>().matrix();
      dstats->bottomRows(L) =
          (0.5 * (1.0 - diff.square() * inv_var) / n).template cast<S>().matrix();
    }
    return loss;
  }

  // Ancestral sampling over frames; tau_s scales the sampling stddev.
  Eigen::MatrixXf sample(const AudioFeatures& features, uint64_t seed, double tau_s = 1.0) {
    const int T = features.num_frames;
    const int L = hp_.cont_dim;
    const int W = hp_.width;
    Rng rng = Rng(seed).child("cont_prior_sample");

    nn::MatX<S> ticks(features.bands, static_cast<Eigen::Index>(features.ticks) * T);
    for (Eigen::Index j = 0; j < ticks.cols(); ++j)
      for (int b = 0; b < features.bands; ++b)
        ticks(b, j) = static_cast<S>(features.data[j * features.bands + b]);
    nn::MatX<S> cond = in_c_.forward(cond_.forward(ticks, T, 1));

    nn::MatX<S> z = nn::MatX<S>::Zero(L, T);
    nn::MatX<S> x(W, T);
    std::vector<nn::MatX<S>> acts(convs_.size(), nn::MatX<S>(W, T));
    nn::Activation<S> act(hp_.act());
    auto act_col = [&](const nn::VecX<S>& v) {
      nn::MatX<S> m = v;
      return nn::VecX<S>(act.forward(m).col(0));
    };
    const int dils[4] = {1, hp_.dil2, hp_.dil3, hp_.dil4};

    for (int t = 0; t < T; ++t) {
      nn::VecX<S> z_prev = t > 0 ? nn::VecX<S>(z.col(t - 1)) : nn::VecX<S>(nn::VecX<S>::Zero(L));
      x.col(t) = act_col((in_z_.forward(nn::MatX<S>(z_prev))).col(0) + cond.col(t));
      const nn::MatX<S>* input = &x;
      for (size_t l = 0; l < convs_.size(); ++l) {
        nn::VecX<S> pre = convs_[l].bias().value.col(0);
        pre.noalias() += convs_[l].tap(0).value * input->col(t);
        if (t - dils[l] >= 0) pre.noalias() += convs_[l].tap(1).value * input->col(t - dils[l]);
        acts[l].col(t) = act_col(pre);
        input = &acts[l];
      }
      nn::VecX<S> stats = (head_.forward(nn::MatX<S>(acts.back().col(t)))).col(0);
      for (int r = 0; r < L; ++r) {
        const double mean = stats(r);
        double logvar = std::clamp(static_cast<double>(stats(L + r)), -10.0, 6.0);
        z(r, t) = static_cast<S>(mean + tau_s * std::exp(0.5 * logvar) * rng.normal());
      }
    }
    return z.template cast<float>();
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

  static ContinuousPrior from_checkpoint(const Checkpoint& c) {
    check(c.kind == "prior", "from_checkpoint: expected a prior checkpoint");
    ContinuousPrior m;
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
  PriorHyper hp_;
  AudioEncoder<S> cond_;
  nn::Dense<S> in_z_, in_c_, head_;
  nn::Activation<S> act0_;
  std::vector<nn::TemporalConv<S>> convs_;
  std::vector<nn::Activation<S>> acts_;
};

using ContinuousPriorF = ContinuousPrior<float>;

inline PriorTrainResult train_prior_categorical(const PriorTrainConfig& cfg,
                                                const std::vector<EncodedSequence>& data) {
  return train_prior(cfg, data);
}

struct ContinuousPriorTrainResult {
  ContinuousPriorF model;
  double final_loss = 0.0;
};

inline ContinuousPriorTrainResult train_prior_continuous(PriorTrainConfig cfg,
                                                         const std::vector<EncodedSequence>& data) {
  using S = float;
  check(!data.empty(), "train_prior_continuous: empty encoded dataset");
  check(data.front().z.size() > 0, "train_prior_continuous: dataset has no continuous latents");
  cfg.hyper.latent = LatentKind::kContinuous;
  cfg.hyper.validate();
  const int L = cfg.hyper.cont_dim;
  for (const auto& e : data)
    check(e.z.rows() == L && e.features != nullptr, "train_prior_continuous: latent mismatch");

  ContinuousPriorTrainResult result;
  result.model.init(cfg.hyper, cfg.seed);
  auto params = result.model.collect();
  nn::Adam adam({cfg.lr, 0.9, 0.999, 1e-8});
  Rng rng_data = Rng(cfg.seed).child("cprior_data");

  const int B = cfg.batch;
  std::ofstream log;
  if (!cfg.log_path.empty()) log.open(cfg.log_path);

  for (int step = 0; step < cfg.steps; ++step) {
    const int T = cfg.crop_frames;
    nn::MatX<S> z(L, static_cast<Eigen::Index>(T) * B);
    nn::MatX<S> ticks(cfg.hyper.mel_bands,
                      static_cast<Eigen::Index>(cfg.hyper.mel_ticks) * T * B);
    for (int b = 0; b < B; ++b) {
      const EncodedSequence& e = data[rng_data.uniform_index(data.size())];
      const int len = static_cast<int>(e.z.cols());
      const int t0 = len > T ? static_cast<int>(rng_data.uniform_index(len - T + 1)) : 0;
      for (int t = 0; t < T; ++t) {
        const int src = std::min(t0 + t, len - 1);
        z.col(static_cast<Eigen::Index>(t) * B + b) = e.z.col(src).cast<S>();
        for (int f = 0; f < cfg.hyper.mel_ticks; ++f) {
          const Eigen::Index col = (static_cast<Eigen::Index>(t) * B + b) * cfg.hyper.mel_ticks + f;
          for (int m = 0; m < cfg.hyper.mel_bands; ++m)
            ticks(m, col) = e.features->at(src, f, m);
        }
      }
    }

    nn::zero_grads(params);
    nn::MatX<S> stats = result.model.forward_stats(z, ticks, T, B);
    nn::MatX<S> dstats;
    const double loss = ContinuousPrior<S>::nll(stats, z, &dstats);
    if (!std::isfinite(loss))
      throw contract_error("train_prior_continuous: loss diverged at step " +
                           std::to_string(step));
    result.model.backward(dstats);
    adam.step(params);
    result.final_loss = loss;
    if (log.is_open()) log << "step " << step << " nll " << loss << "\n";
  }
  return result;
}

}  // namespace speechmesh
