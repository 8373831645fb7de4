#pragma once

// The latent face model: encoder trunk + categorization + mesh decoder,
// with the continuous-latent baseline as an alternative head. Includes
// the matrix adapters between the geometry/audio containers and the
// frame-major batch layout, and checkpoint (de)serialization.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "speechmesh/audio/mel.hpp"
#include "speechmesh/core/check.hpp"
#include "speechmesh/core/rng.hpp"
#include "speechmesh/geometry/mesh.hpp"
#include "speechmesh/model/checkpoint.hpp"
#include "speechmesh/model/decoder.hpp"
#include "speechmesh/model/encoder.hpp"
#include "speechmesh/model/hyper.hpp"
#include "speechmesh/model/latent_code.hpp"
#include "speechmesh/nn/gumbel.hpp"

namespace speechmesh {

// ---------------------------------------------------------------------------
// Adapters between containers and batch matrices.
// ---------------------------------------------------------------------------

template <class S>
nn::MatX<S> mesh_to_matrix(const MeshSequence& seq) {
  nn::MatX<S> m(static_cast<Eigen::Index>(seq.num_vertices) * 3, seq.num_frames);
  for (int t = 0; t < seq.num_frames; ++t) {
    const float* f = seq.frame(t);
    for (int i = 0; i < seq.num_vertices * 3; ++i) m(i, t) = static_cast<S>(f[i]);
  }
  return m;
}

template <class S>
MeshSequence matrix_to_mesh(const nn::MatX<S>& m, int V, float fps = 30.0f) {
  check(m.rows() == static_cast<Eigen::Index>(V) * 3, "matrix_to_mesh: row count mismatch");
  MeshSequence seq = MeshSequence::zeros(static_cast<int>(m.cols()), V, fps);
  for (int t = 0; t < seq.num_frames; ++t) {
    float* f = seq.frame(t);
    for (int i = 0; i < V * 3; ++i) f[i] = static_cast<float>(m(i, t));
  }
  return seq;
}

template <class S>
nn::MatX<S> template_to_matrix(const TemplateMesh& mesh) {
  nn::MatX<S> m(static_cast<Eigen::Index>(mesh.vertex_count()) * 3, 1);
  for (int i = 0; i < mesh.vertex_count() * 3; ++i) m(i, 0) = static_cast<S>(mesh.vertices[i]);
  return m;
}

template <class S>
nn::MatX<S> features_to_ticks(const AudioFeatures& feat) {
  const Eigen::Index cols = static_cast<Eigen::Index>(feat.ticks) * feat.num_frames;
  nn::MatX<S> m(feat.bands, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (int b = 0; b < feat.bands; ++b)
      m(b, j) = static_cast<S>(feat.data[static_cast<size_t>(j) * feat.bands + b]);
  return m;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

template <class S>
class LatentModel {
 public:
  LatentModel() = default;
  explicit LatentModel(const LatentHyper& hp, uint64_t init_seed) { init(hp, init_seed); }

  void init(const LatentHyper& hp, uint64_t init_seed) {
    hp.validate();
    hp_ = hp;
    Rng rng = Rng(init_seed).child("model_init");
    encoder_.init(hp, rng);
    decoder_.init(hp, rng);
    if (hp.latent == LatentKind::kContinuous)
      cont_proj_.init(hp.cont_dim, hp.code_feature_dim(), rng);
    gumbel_ = nn::GumbelHeads<S>(hp.H, hp.C);
  }

  const LatentHyper& hyper() const { return hp_; }
  LatentEncoder<S>& encoder() { return encoder_; }
  MeshDecoder<S>& decoder() { return decoder_; }
  nn::GumbelHeads<S>& gumbel() { return gumbel_; }

  std::vector<nn::ParamRef<S>> collect() {
    std::vector<nn::ParamRef<S>> params;
    encoder_.collect(params, "encoder");
    decoder_.collect(params, "decoder");
    if (hp_.latent == LatentKind::kContinuous) cont_proj_.collect(params, "cont_proj");
    return params;
  }

  // ---- categorical training path -----------------------------------------

  // mesh_mm: (V*3 x T*B) expression input in mm; ticks: mel tick matrix
  // or nullptr for audio-free models; templates_mm: (V*3 x B).
  // Returns the reconstruction in mm.
  nn::MatX<S> forward_categorical(const nn::MatX<S>& mesh_mm, const nn::MatX<S>* ticks,
                                  const nn::MatX<S>& templates_mm, int T, int B, double tau,
                                  nn::CategorizeMode mode, Rng* rng) {
    check(hp_.latent == LatentKind::kCategorical, "forward_categorical: continuous model");
    nn::MatX<S> logits = encoder_.forward(mesh_mm * S(hp_.coord_scale), ticks, T, B);
    nn::MatX<S> code = gumbel_.forward(logits, tau, mode, rng);
    return decoder_.forward_soft(code, templates_mm, T, B);
  }

  void backward_categorical(const nn::MatX<S>& dy_mm) {
    nn::MatX<S> dcode = decoder_.backward(dy_mm);
    nn::MatX<S> dlogits = gumbel_.backward(dcode);
    encoder_.backward(dlogits);
  }

  // ---- continuous training path -------------------------------------------

  struct ContinuousState {
    nn::MatX<S> mean, logvar, eps, z;
  };

  nn::MatX<S> forward_continuous(const nn::MatX<S>& mesh_mm, const nn::MatX<S>* ticks,
                                 const nn::MatX<S>& templates_mm, int T, int B, bool sample,
                                 Rng* rng, ContinuousState* state) {
    check(hp_.latent == LatentKind::kContinuous, "forward_continuous: categorical model");
    nn::MatX<S> stats = encoder_.forward(mesh_mm * S(hp_.coord_scale), ticks, T, B);
    const int L = hp_.cont_dim;
    state->mean = stats.topRows(L);
    state->logvar = stats.bottomRows(L);
    // Keep the variance in a sane range; gradients pass through
    // unclamped values only when inside the range.
    state->logvar = state->logvar.cwiseMax(S(-10)).cwiseMin(S(6));
    if (sample) {
      check(rng != nullptr, "forward_continuous: sampling requires an rng");
      state->eps.resize(L, stats.cols());
      for (Eigen::Index c = 0; c < state->eps.cols(); ++c)
        for (int r = 0; r < L; ++r) state->eps(r, c) = static_cast<S>(rng->normal());
      state->z = state->mean + ((state->logvar * S(0.5)).array().exp() * state->eps.array()).matrix();
    } else {
      state->eps = nn::MatX<S>::Zero(L, stats.cols());
      state->z = state->mean;
    }
    nn::MatX<S> feat = cont_proj_.forward(state->z);
    return decoder_.forward_feature(feat, templates_mm, T, B);
  }

  // kl_weight adds the gradient of
  //   kl_weight * mean(0.5*(mean^2 + var - logvar - 1))
  // which keeps the posterior from collapsing its variance.
  void backward_continuous(const nn::MatX<S>& dy_mm, const ContinuousState& state,
                           double kl_weight) {
    nn::MatX<S> dfeat = decoder_.backward(dy_mm);
    nn::MatX<S> dz = cont_proj_.backward(dfeat);
    const double norm = kl_weight / static_cast<double>(state.mean.size());
    nn::MatX<S> dmean = dz + (state.mean * S(norm)).eval();
    nn::MatX<S> dlogvar =
        (dz.array() * state.eps.array() * S(0.5) * (state.logvar * S(0.5)).array().exp()).matrix() +
        ((state.logvar.array().exp() - S(1)) * S(0.5 * norm)).matrix();
    encoder_.backward(nn::vstack(dmean, dlogvar));
  }

  static double kl_value(const ContinuousState& state) {
    const auto m = state.mean.array().template cast<double>();
    const auto lv = state.logvar.array().template cast<double>();
    return 0.5 * (m.square() + lv.exp() - lv - 1.0).mean();
  }

  // ---- inference (single sequence) ----------------------------------------

  // EncoderOutput: latent logits as an (H*C x T) matrix.
  Eigen::MatrixXf encode_logits(const MeshSequence& x, const AudioFeatures* a) {
    check(x.num_vertices == hp_.V, "encode: sequence V=" + std::to_string(x.num_vertices) +
                                       " but model V=" + std::to_string(hp_.V));
    const nn::MatX<S> mesh = mesh_to_matrix<S>(x) * S(hp_.coord_scale);
    nn::MatX<S> ticks;
    const nn::MatX<S>* ticks_ptr = nullptr;
    check(hp_.use_audio || a == nullptr,
          "encode: model was trained without an audio encoder");
    if (hp_.use_audio) {
      check(a != nullptr, "encode: model requires audio features");
      check(a->num_frames == x.num_frames, "encode: audio/mesh frame count mismatch");
      check(a->ticks == hp_.mel_ticks && a->bands == hp_.mel_bands,
            "encode: audio feature shape mismatch");
      ticks = features_to_ticks<S>(*a);
      ticks_ptr = &ticks;
    }
    nn::MatX<S> logits = encoder_.forward(mesh, ticks_ptr, x.num_frames, 1);
    return logits.template cast<float>();
  }

  LatentCode categorize(const Eigen::MatrixXf& logits, double tau, nn::CategorizeMode mode,
                        Rng* rng) {
    check(hp_.latent == LatentKind::kCategorical, "categorize: continuous model");
    nn::MatX<S> l = logits.cast<S>();
    nn::MatX<S> values = gumbel_.forward(l, tau, mode, rng);
    LatentCode code;
    code.C = hp_.C;
    code.labels = gumbel_.labels();
    code.soft = values.template cast<float>();
    return code;
  }

  LatentCode encode(const MeshSequence& x, const AudioFeatures* a,
                    nn::CategorizeMode mode = nn::CategorizeMode::kArgmax, double tau = 1.0,
                    Rng* rng = nullptr) {
    return categorize(encode_logits(x, a), tau, mode, rng);
  }

  // Continuous inference: posterior mean per frame (cont_dim x T).
  Eigen::MatrixXf encode_mean(const MeshSequence& x, const AudioFeatures* a) {
    check(hp_.latent == LatentKind::kContinuous, "encode_mean: categorical model");
    Eigen::MatrixXf stats = encode_logits(x, a);
    return stats.topRows(hp_.cont_dim);
  }

  MeshSequence decode(const TemplateMesh& tpl, const LatentCode& code, float fps = 30.0f) {
    check(tpl.vertex_count() == hp_.V, "decode: template V mismatch");
    check(code.heads() == hp_.H && code.C == hp_.C,
          "decode: code (H,C) does not match the checkpoint");
    nn::MatX<S> soft = code.soft.cast<S>();
    nn::MatX<S> tpl_m = template_to_matrix<S>(tpl);
    nn::MatX<S> y = decoder_.forward_soft(soft, tpl_m, code.num_frames(), 1);
    return matrix_to_mesh(y, hp_.V, fps);
  }

  MeshSequence decode_continuous(const TemplateMesh& tpl, const Eigen::MatrixXf& z,
                                 float fps = 30.0f) {
    check(hp_.latent == LatentKind::kContinuous, "decode_continuous: categorical model");
    check(tpl.vertex_count() == hp_.V, "decode: template V mismatch");
    check(z.rows() == hp_.cont_dim, "decode_continuous: latent width mismatch");
    nn::MatX<S> feat = cont_proj_.forward(z.cast<S>());
    nn::MatX<S> y = decoder_.forward_feature(feat, template_to_matrix<S>(tpl),
                                             static_cast<int>(z.cols()), 1);
    return matrix_to_mesh(y, hp_.V, fps);
  }

  // Plain reconstruction with deterministic (argmax / posterior-mean)
  // categorization.
  MeshSequence reconstruct(const TemplateMesh& tpl, const MeshSequence& x,
                           const AudioFeatures* a) {
    if (hp_.latent == LatentKind::kCategorical)
      return decode(tpl, encode(x, a), x.fps);
    return decode_continuous(tpl, encode_mean(x, a), x.fps);
  }

  // ---- checkpoint ----------------------------------------------------------

  Checkpoint to_checkpoint() {
    Checkpoint c;
    c.kind = "latent";
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

  static LatentModel from_checkpoint(const Checkpoint& c) {
    check(c.kind == "latent", "from_checkpoint: expected a latent checkpoint, got \"" + c.kind +
                                  "\"");
    LatentModel m;
    m.init(LatentHyper::from_checkpoint(c), /*init_seed=*/0);
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
  LatentHyper hp_;
  LatentEncoder<S> encoder_;
  MeshDecoder<S> decoder_;
  nn::Dense<S> cont_proj_;
  nn::GumbelHeads<S> gumbel_{1, 2};
};

using LatentModelF = LatentModel<float>;

}  // namespace speechmesh
