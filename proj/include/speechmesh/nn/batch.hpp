#pragma once

// Column/row bookkeeping helpers for the frame-major batch layout
// (column index = t*B + b).

#include <Eigen/Dense>

#include "speechmesh/nn/layers.hpp"

namespace speechmesh::nn {

template <class S>
MatX<S> vstack(const MatX<S>& a, const MatX<S>& b) {
  MatX<S> out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

// Repeat a per-sequence matrix (R x B) across T frame blocks -> (R x T*B).
template <class S>
MatX<S> tile_frames(const MatX<S>& per_seq, int T) {
  const Eigen::Index B = per_seq.cols();
  MatX<S> out(per_seq.rows(), T * B);
  for (int t = 0; t < T; ++t) out.middleCols(t * B, B) = per_seq;
  return out;
}

// Adjoint of tile_frames: sum frame blocks -> (R x B).
template <class S>
MatX<S> sum_frames(const MatX<S>& d, int T, int B) {
  MatX<S> out = MatX<S>::Zero(d.rows(), B);
  for (int t = 0; t < T; ++t) out += d.middleCols(static_cast<Eigen::Index>(t) * B, B);
  return out;
}

// Regroup (R x N*groups) with per-column groups into stacked rows
// (R*groups x N): out(g*R + r, n) = in(r, n*groups + g).
template <class S>
MatX<S> stack_groups(const MatX<S>& in, int groups) {
  const Eigen::Index R = in.rows();
  const Eigen::Index N = in.cols() / groups;
  MatX<S> out(R * groups, N);
  for (Eigen::Index n = 0; n < N; ++n)
    for (int g = 0; g < groups; ++g) out.col(n).segment(g * R, R) = in.col(n * groups + g);
  return out;
}

template <class S>
MatX<S> unstack_groups(const MatX<S>& in, int groups) {
  const Eigen::Index R = in.rows() / groups;
  const Eigen::Index N = in.cols();
  MatX<S> out(R, N * groups);
  for (Eigen::Index n = 0; n < N; ++n)
    for (int g = 0; g < groups; ++g) out.col(n * groups + g) = in.col(n).segment(g * R, R);
  return out;
}

// Repeat each frame column block across H positions: (R x T*B) ->
// (R x T*H*B) with column ((t*H + h)*B + b) = in(t*B + b).
template <class S>
MatX<S> tile_positions(const MatX<S>& per_frame, int T, int H, int B) {
  MatX<S> out(per_frame.rows(), static_cast<Eigen::Index>(T) * H * B);
  for (int t = 0; t < T; ++t)
    for (int h = 0; h < H; ++h)
      out.middleCols((static_cast<Eigen::Index>(t) * H + h) * B, B) =
          per_frame.middleCols(static_cast<Eigen::Index>(t) * B, B);
  return out;
}

// Adjoint of tile_positions: sum the H position blocks of each frame.
template <class S>
MatX<S> sum_positions(const MatX<S>& d, int T, int H, int B) {
  MatX<S> out = MatX<S>::Zero(d.rows(), static_cast<Eigen::Index>(T) * B);
  for (int t = 0; t < T; ++t)
    for (int h = 0; h < H; ++h)
      out.middleCols(static_cast<Eigen::Index>(t) * B, B) +=
          d.middleCols((static_cast<Eigen::Index>(t) * H + h) * B, B);
  return out;
}

}  // namespace speechmesh::nn
