#pragma once

// Reconstruction losses. All masked squared errors are normalized by
// T*V so values are resolution independent; units are mm^2.

#include <cmath>
#include <vector>

#include "speechmesh/core/check.hpp"
#include "speechmesh/geometry/mesh.hpp"

namespace speechmesh {

// sum_t sum_v w_v * ||pred_{t,v} - target_{t,v}||^2 / (T*V)
inline double masked_sq_error(const MeshSequence& pred, const MeshSequence& target,
                              const VertexMask& mask) {
  check(pred.num_frames == target.num_frames && pred.num_vertices == target.num_vertices,
        "masked_sq_error: shape mismatch");
  check(mask.vertex_count() == pred.num_vertices, "masked_sq_error: mask size mismatch");
  double acc = 0.0;
  for (int t = 0; t < pred.num_frames; ++t) {
    const float* p = pred.frame(t);
    const float* g = target.frame(t);
    for (int v = 0; v < pred.num_vertices; ++v) {
      const double dx = static_cast<double>(p[3 * v]) - g[3 * v];
      const double dy = static_cast<double>(p[3 * v + 1]) - g[3 * v + 1];
      const double dz = static_cast<double>(p[3 * v + 2]) - g[3 * v + 2];
      acc += mask.weights[v] * (dx * dx + dy * dy + dz * dz);
    }
  }
  return acc / (static_cast<double>(pred.num_frames) * pred.num_vertices);
}

// Cross-modality loss: upper-face accuracy must come from the
// expression input (audio swapped out), mouth accuracy from the audio
// input (expression swapped out).
inline double cross_modality_loss(const MeshSequence& h_audio, const MeshSequence& h_expr,
                                  const MeshSequence& x, const VertexMask& upper,
                                  const VertexMask& mouth) {
  return masked_sq_error(h_expr, x, upper) + masked_sq_error(h_audio, x, mouth);
}

inline double eyelid_loss(const MeshSequence& h, const MeshSequence& x, const VertexMask& eyelid) {
  return masked_sq_error(h, x, eyelid);
}

inline double total_loss(double xmod, double eyelid) { return xmod + eyelid; }

// Mean over frames and vertices of the per-vertex Euclidean error (mm).
inline double mean_vertex_error(const MeshSequence& pred, const MeshSequence& target) {
  check(pred.num_frames == target.num_frames && pred.num_vertices == target.num_vertices,
        "mean_vertex_error: shape mismatch");
  double acc = 0.0;
  for (int t = 0; t < pred.num_frames; ++t) {
    const float* p = pred.frame(t);
    const float* g = target.frame(t);
    for (int v = 0; v < pred.num_vertices; ++v) {
      const double dx = static_cast<double>(p[3 * v]) - g[3 * v];
      const double dy = static_cast<double>(p[3 * v + 1]) - g[3 * v + 1];
      const double dz = static_cast<double>(p[3 * v + 2]) - g[3 * v + 2];
      acc += std::sqrt(dx * dx + dy * dy + dz * dz);
    }
  }
  return acc / (static_cast<double>(pred.num_frames) * pred.num_vertices);
}

// Crop or edge-pad a sequence to exactly T frames (counterpart sampling
// for the cross reconstructions).
inline MeshSequence crop_or_pad(const MeshSequence& seq, int T, int t0 = 0) {
  check(T >= 1, "crop_or_pad: T must be >= 1");
  MeshSequence out = MeshSequence::zeros(T, seq.num_vertices, seq.fps);
  for (int t = 0; t < T; ++t) {
    const int src = std::min(std::max(t0 + t, 0), seq.num_frames - 1);
    const float* f = seq.frame(src);
    std::copy(f, f + seq.num_vertices * 3, out.frame(t));
  }
  return out;
}

inline AudioFeatures crop_or_pad(const AudioFeatures& feat, int T, int t0 = 0) {
  check(T >= 1, "crop_or_pad: T must be >= 1");
  AudioFeatures out;
  out.num_frames = T;
  out.ticks = feat.ticks;
  out.bands = feat.bands;
  out.data.resize(static_cast<size_t>(T) * feat.ticks * feat.bands);
  const size_t block = static_cast<size_t>(feat.ticks) * feat.bands;
  for (int t = 0; t < T; ++t) {
    const int src = std::min(std::max(t0 + t, 0), feat.num_frames - 1);
    std::copy(feat.data.begin() + src * block, feat.data.begin() + (src + 1) * block,
              out.data.begin() + t * block);
  }
  return out;
}

}  // namespace speechmesh
