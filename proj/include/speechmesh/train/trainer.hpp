#pragma once

// Latent-model training loop: the cross-modality objective and its two
// ablations (expression-only l2, expression+audio l2), for both the
// categorical space and the continuous baseline. Deterministic given
// the seed: data order, Gumbel noise, counterpart sampling and
// parameter init all derive from it.

#include <cmath>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "speechmesh/model/latent_model.hpp"
#include "speechmesh/synth/dataset.hpp"
#include "speechmesh/train/losses.hpp"

namespace speechmesh {

enum class TrainMode { kExprOnlyL2, kExprAudioL2, kExprAudioXmod };

inline const char* train_mode_name(TrainMode m) {
  switch (m) {
    case TrainMode::kExprOnlyL2: return "expr_only_l2";
    case TrainMode::kExprAudioL2: return "expr_audio_l2";
    case TrainMode::kExprAudioXmod: return "expr_audio_xmod";
  }
  return "?";
}

inline TrainMode train_mode_from_name(const std::string& s) {
  if (s == "expr_only_l2") return TrainMode::kExprOnlyL2;
  if (s == "expr_audio_l2") return TrainMode::kExprAudioL2;
  if (s == "expr_audio_xmod") return TrainMode::kExprAudioXmod;
  throw contract_error("unknown training mode: " + s);
}

struct TrainConfig {
  TrainMode mode = TrainMode::kExprAudioXmod;
  LatentHyper hyper;   // V is overwritten from the dataset
  int steps = 2000;
  int batch = 4;
  int crop_frames = 32;
  double lr = 1e-3;
  double kl_weight = 1e-3;  // continuous baseline only
  uint64_t seed = 0;
  int log_every = 25;
  std::string log_path;  // loss curve; empty = no file
};

namespace detail {

// Weighted squared error over batch matrices; weights per row (vertex
// weight repeated for x/y/z). Returns the loss and accumulates the
// gradient. Normalization: T*V per sequence, then mean over the batch.
template <class S>
double weighted_mse(const nn::MatX<S>& pred, const nn::MatX<S>& target, const nn::VecX<S>& w,
                    int T, int V, int B, nn::MatX<S>* dpred) {
  const double norm = 1.0 / (static_cast<double>(T) * V * B);
  const nn::MatX<S> diff = pred - target;
  const double loss =
      (diff.array().square().colwise() * w.array()).sum() * norm;
  if (dpred) *dpred += (S(2 * norm) * (diff.array().colwise() * w.array())).matrix();
  return loss;
}

template <class S>
nn::VecX<S> mask_row_weights(const VertexMask& mask) {
  nn::VecX<S> w(static_cast<Eigen::Index>(mask.vertex_count()) * 3);
  for (int v = 0; v < mask.vertex_count(); ++v)
    for (int k = 0; k < 3; ++k) w(3 * v + k) = static_cast<S>(mask.weights[v]);
  return w;
}

struct Crop {
  int seq = 0;
  int t0 = 0;
};

}  // namespace detail

struct TrainResult {
  LatentModelF model;
  double final_loss = 0.0;
  std::vector<double> loss_curve;  // one entry per step
};

inline TrainResult train_latent_model(TrainConfig cfg, const LoadedDataset& ds) {
  using S = float;
  check(!ds.sequences.empty(), "train_latent_model: empty dataset");
  const std::vector<int> train_idx = ds.sequence_indices("train");
  check(!train_idx.empty(), "train_latent_model: no training split in manifest");

  const int V = ds.templates.front().vertex_count();
  cfg.hyper.V = V;
  cfg.hyper.use_audio = cfg.mode != TrainMode::kExprOnlyL2;
  cfg.hyper.validate();
  for (const auto& s : ds.sequences)
    check(s.meshes.num_vertices == V, "train_latent_model: inconsistent V across dataset");

  const RegionMasks masks = build_masks(ds.templates.front().labels,
                                        static_cast<float>(cfg.hyper.w_high),
                                        static_cast<float>(cfg.hyper.w_low));
  const nn::VecX<S> w_mouth = detail::mask_row_weights<S>(masks.mouth);
  const nn::VecX<S> w_upper = detail::mask_row_weights<S>(masks.upper);
  const nn::VecX<S> w_eyelid = detail::mask_row_weights<S>(masks.eyelid);
  const nn::VecX<S> w_plain = nn::VecX<S>::Ones(static_cast<Eigen::Index>(V) * 3);

  TrainResult result;
  result.model.init(cfg.hyper, cfg.seed);
  auto params = result.model.collect();
  nn::Adam adam({cfg.lr, 0.9, 0.999, 1e-8});

  Rng rng_data = Rng(cfg.seed).child("data");
  Rng rng_gumbel = Rng(cfg.seed).child("gumbel");
  Rng rng_noise = Rng(cfg.seed).child("reparam");

  const int B = cfg.batch;
  const int T = cfg.crop_frames;
  const int v3 = V * 3;
  const int tick_cols = cfg.hyper.mel_ticks;

  std::ofstream log;
  if (!cfg.log_path.empty()) {
    log.open(cfg.log_path);
    check_io(log.good(), "train_latent_model: cannot open log file " + cfg.log_path);
  }

  auto sample_crop = [&](Rng& rng) {
    detail::Crop c;
    c.seq = train_idx[rng.uniform_index(train_idx.size())];
    const int len = ds.sequences[c.seq].meshes.num_frames;
    c.t0 = len > T ? static_cast<int>(rng.uniform_index(len - T + 1)) : 0;
    return c;
  };

  // Gathers the expression matrix (mm), mel tick matrix and templates
  // for a list of crops in the frame-major batch layout.
  auto gather = [&](const std::vector<detail::Crop>& crops, nn::MatX<S>* mesh, nn::MatX<S>* ticks,
                    nn::MatX<S>* templates) {
    if (mesh) mesh->resize(v3, static_cast<Eigen::Index>(T) * B);
    if (ticks)
      ticks->resize(cfg.hyper.mel_bands, static_cast<Eigen::Index>(tick_cols) * T * B);
    if (templates) templates->resize(v3, B);
    for (int b = 0; b < B; ++b) {
      const LoadedSequence& s = ds.sequences[crops[b].seq];
      if (templates) {
        const TemplateMesh& tpl = ds.templates[s.identity_index];
        for (int i = 0; i < v3; ++i) (*templates)(i, b) = tpl.vertices[i];
      }
      for (int t = 0; t < T; ++t) {
        const int src = std::min(crops[b].t0 + t, s.meshes.num_frames - 1);
        if (mesh) {
          const float* f = s.meshes.frame(src);
          for (int i = 0; i < v3; ++i) (*mesh)(i, static_cast<Eigen::Index>(t) * B + b) = f[i];
        }
        if (ticks) {
          for (int f2 = 0; f2 < tick_cols; ++f2) {
            const Eigen::Index col = (static_cast<Eigen::Index>(t) * B + b) * tick_cols + f2;
            for (int m = 0; m < cfg.hyper.mel_bands; ++m)
              (*ticks)(m, col) = s.features.at(src, f2, m);
          }
        }
      }
    }
  };

  const bool categorical = cfg.hyper.latent == LatentKind::kCategorical;
  const bool use_audio = cfg.hyper.use_audio;
  const bool xmod = cfg.mode == TrainMode::kExprAudioXmod;

  for (int step = 0; step < cfg.steps; ++step) {
    const double frac = cfg.steps > 1 ? static_cast<double>(step) / (cfg.steps - 1) : 1.0;
    const double tau = cfg.hyper.tau_start + (cfg.hyper.tau_end - cfg.hyper.tau_start) * frac;

    std::vector<detail::Crop> crops(B), swaps(B);
    for (int b = 0; b < B; ++b) crops[b] = sample_crop(rng_data);
    for (int b = 0; b < B; ++b) swaps[b] = sample_crop(rng_data);

    nn::MatX<S> x, ticks, templates;
    gather(crops, &x, use_audio ? &ticks : nullptr, &templates);

    nn::zero_grads(params);
    double loss_xmod = 0.0, loss_eyelid = 0.0, loss_plain = 0.0, kl = 0.0;

    struct Term {
      const nn::VecX<S>* w;
      double* out;
    };
    auto run_pass = [&](const nn::MatX<S>& mesh_in, const nn::MatX<S>* ticks_in,
                        const std::vector<Term>& terms) {
      nn::MatX<S> dpred = nn::MatX<S>::Zero(v3, static_cast<Eigen::Index>(T) * B);
      nn::MatX<S> pred;
      typename LatentModel<S>::ContinuousState state;
      if (categorical) {
        pred = result.model.forward_categorical(mesh_in, ticks_in, templates, T, B, tau,
                                                nn::CategorizeMode::kSampleHard, &rng_gumbel);
      } else {
        pred = result.model.forward_continuous(mesh_in, ticks_in, templates, T, B,
                                               /*sample=*/true, &rng_noise, &state);
      }
      for (const Term& term : terms)
        *term.out += detail::weighted_mse(pred, x, *term.w, T, V, B, &dpred);
      if (categorical) {
        result.model.backward_categorical(dpred);
      } else {
        kl += LatentModel<S>::kl_value(state);
        result.model.backward_continuous(dpred, state, cfg.kl_weight);
      }
    };

    if (xmod) {
      // h_audio = D(h_x, E(x_swap, a)): mouth must be right from audio.
      nn::MatX<S> x_swap, ticks_swap;
      gather(swaps, &x_swap, nullptr, nullptr);
      run_pass(x_swap, use_audio ? &ticks : nullptr, {{&w_mouth, &loss_xmod}});
      // h_expr = D(h_x, E(x, a_swap)): upper face right from the
      // expression input; the eyelid emphasis rides on this path.
      gather(swaps, nullptr, &ticks_swap, nullptr);
      run_pass(x, &ticks_swap, {{&w_upper, &loss_xmod}, {&w_eyelid, &loss_eyelid}});
    } else {
      run_pass(x, use_audio ? &ticks : nullptr, {{&w_plain, &loss_plain}});
    }

    const double total = loss_xmod + loss_eyelid + loss_plain + cfg.kl_weight * kl;
    if (!std::isfinite(total))
      throw contract_error("train_latent_model: loss diverged (non-finite) at step " +
                           std::to_string(step));
    adam.step(params);

    result.loss_curve.push_back(total);
    result.final_loss = total;
    if (log.is_open()) {
      log << "step " << step << " total " << total;
      if (xmod)
        log << " xmod " << loss_xmod << " eyelid " << loss_eyelid;
      else
        log << " l2 " << loss_plain;
      if (!categorical) log << " kl " << kl;
      log << " tau " << tau << "\n";
    }
    if (cfg.log_every > 0 && step % cfg.log_every == 0 && log.is_open()) log.flush();
  }
  return result;
}

// Mean vertex error (mm) over a dataset split: plain reconstruction
// with all inputs from the same person, deterministic categorization,
// pooled over all frames and vertices.
inline double reconstruction_error(LatentModelF& model, const LoadedDataset& ds,
                                   const std::string& split) {
  const std::vector<int> idx = ds.sequence_indices(split);
  check(!idx.empty(), "reconstruction_error: empty split \"" + split + "\"");
  double acc = 0.0;
  size_t frames = 0;
  for (int i : idx) {
    const LoadedSequence& s = ds.sequences[i];
    const TemplateMesh& tpl = ds.templates[s.identity_index];
    const AudioFeatures* a = model.hyper().use_audio ? &s.features : nullptr;
    MeshSequence pred = model.reconstruct(tpl, s.meshes, a);
    acc += mean_vertex_error(pred, s.meshes) * s.meshes.num_frames;
    frames += static_cast<size_t>(s.meshes.num_frames);
  }
  return acc / static_cast<double>(frames);
}

}  // namespace speechmesh
