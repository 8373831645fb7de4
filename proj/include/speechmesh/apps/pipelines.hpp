#pragma once

// End-user pipelines. All three are stateless compositions of the stage
// operations: features -> (prior sample | encoder) -> decoder.

#include <iostream>

#include "speechmesh/audio/mel.hpp"
#include "speechmesh/model/latent_model.hpp"
#include "speechmesh/prior/prior.hpp"
#include "speechmesh/prior/prior_train.hpp"
#include "speechmesh/train/losses.hpp"

namespace speechmesh {

inline void check_latent_prior_match(const LatentModelF& latent, int prior_C, int prior_H) {
  check(latent.hyper().C == prior_C && latent.hyper().H == prior_H,
        "checkpoint mismatch: latent (C,H)=(" + std::to_string(latent.hyper().C) + "," +
            std::to_string(latent.hyper().H) + ") vs prior (C,H)=(" + std::to_string(prior_C) +
            "," + std::to_string(prior_H) + ")");
}

// Audio-driven animation: mel features, ancestral prior sampling, decode.
inline MeshSequence animate(LatentModelF& latent, PriorModelF& prior, const TemplateMesh& tpl,
                            const Waveform& wave, uint64_t seed, double tau_s = 1.0,
                            double fps = 30.0) {
  check_latent_prior_match(latent, prior.hyper().C, prior.hyper().H);
  check(tpl.vertex_count() == latent.hyper().V,
        "animate: template V=" + std::to_string(tpl.vertex_count()) + " but checkpoint V=" +
            std::to_string(latent.hyper().V));
  const int T = num_visual_frames(wave, fps);
  check(T >= 1, "animate: waveform shorter than one visual frame");
  const AudioFeatures feat = mel_spectrogram(wave, T, fps);
  const LatentCode code = prior.sample(feat, seed, tau_s);
  return latent.decode(tpl, code, static_cast<float>(fps));
}

// Continuous-baseline animation.
inline MeshSequence animate_continuous(LatentModelF& latent, ContinuousPriorF& prior,
                                       const TemplateMesh& tpl, const Waveform& wave,
                                       uint64_t seed, double tau_s = 1.0, double fps = 30.0) {
  check(latent.hyper().latent == LatentKind::kContinuous, "animate_continuous: categorical model");
  check(latent.hyper().cont_dim == prior.hyper().cont_dim, "checkpoint mismatch: cont_dim");
  check(tpl.vertex_count() == latent.hyper().V, "animate: template V mismatch");
  const int T = num_visual_frames(wave, fps);
  check(T >= 1, "animate: waveform shorter than one visual frame");
  const AudioFeatures feat = mel_spectrogram(wave, T, fps);
  const Eigen::MatrixXf z = prior.sample(feat, seed, tau_s);
  return latent.decode_continuous(tpl, z, static_cast<float>(fps));
}

// Expression re-targeting: encode the source performance (deterministic
// argmax categorization), decode onto the target identity's template.
inline MeshSequence retarget(LatentModelF& latent, const MeshSequence& src,
                             const AudioFeatures& src_features, const TemplateMesh& target) {
  const LatentCode code = latent.encode(
      src, latent.hyper().use_audio ? &src_features : nullptr);
  return latent.decode(target, code, src.fps);
}

inline MeshSequence retarget(LatentModelF& latent, const MeshSequence& src,
                             const Waveform& src_wave, const TemplateMesh& target) {
  const AudioFeatures feat = mel_spectrogram(src_wave, src.num_frames, src.fps);
  return retarget(latent, src, feat, target);
}

// Dubbing: new audio drives the mouth, the original performance keeps
// driving the upper face. If the lengths differ the inputs are cropped
// to the shorter one.
inline MeshSequence dub(LatentModelF& latent, const MeshSequence& original,
                        const Waveform& new_wave, const TemplateMesh& tpl,
                        bool* cropped = nullptr) {
  const int T_audio = num_visual_frames(new_wave, original.fps);
  check(T_audio >= 1, "dub: new audio shorter than one visual frame");
  const int T = std::min(original.num_frames, T_audio);
  if (cropped) *cropped = T != original.num_frames || T != T_audio;
  if (T != original.num_frames || T != T_audio)
    std::cerr << "dub: length mismatch (" << original.num_frames << " frames vs " << T_audio
              << " audio frames); cropping to " << T << "\n";
  const MeshSequence orig_crop = crop_or_pad(original, T);
  const AudioFeatures feat = mel_spectrogram(new_wave, T, original.fps);
  const LatentCode code =
      latent.encode(orig_crop, latent.hyper().use_audio ? &feat : nullptr);
  return latent.decode(tpl, code, original.fps);
}

// Cross reconstructions (the two decoder targets of the cross-modality
// objective), exposed for analysis: counterpart inputs are cropped or
// edge-padded to the main sequence's length.
inline std::pair<MeshSequence, MeshSequence> cross_reconstructions(
    LatentModelF& model, const MeshSequence& x, const AudioFeatures& a,
    const MeshSequence& x_swap, const AudioFeatures& a_swap, const TemplateMesh& h_x) {
  const int T = x.num_frames;
  check(a.num_frames == T, "cross_reconstructions: audio/mesh length mismatch");
  const MeshSequence xs = crop_or_pad(x_swap, T);
  const AudioFeatures as = crop_or_pad(a_swap, T);
  const LatentCode code_audio = model.encode(xs, model.hyper().use_audio ? &a : nullptr);
  const LatentCode code_expr = model.encode(x, model.hyper().use_audio ? &as : nullptr);
  return {model.decode(h_x, code_audio, x.fps), model.decode(h_x, code_expr, x.fps)};
}

}  // namespace speechmesh
