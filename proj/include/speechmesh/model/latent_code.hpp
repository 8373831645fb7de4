#pragma once

// Categorical latent code for a sequence: per frame and head one label
// in [0, C) plus the soft (one-hot or relaxed one-hot) form. Labels are
// 0-based throughout.
//
// Cache format LATC: "LATC", u32 version=1, u32 T, u32 H, u16 labels
// row-major (frame-major, head fastest). Only the hard labels are
// persisted.

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "speechmesh/core/binio.hpp"
#include "speechmesh/core/check.hpp"

namespace speechmesh {

struct LatentCode {
  int C = 0;
  Eigen::MatrixXi labels;  // H x T
  Eigen::MatrixXf soft;    // H*C x T, each head row-block sums to 1

  int num_frames() const { return static_cast<int>(labels.cols()); }
  int heads() const { return static_cast<int>(labels.rows()); }

  static LatentCode from_labels(const Eigen::MatrixXi& labels, int C) {
    LatentCode code;
    code.C = C;
    code.labels = labels;
    const int H = static_cast<int>(labels.rows());
    const int T = static_cast<int>(labels.cols());
    code.soft = Eigen::MatrixXf::Zero(static_cast<Eigen::Index>(H) * C, T);
    for (int t = 0; t < T; ++t)
      for (int h = 0; h < H; ++h) {
        const int c = labels(h, t);
        check(c >= 0 && c < C, "LatentCode: label out of range");
        code.soft(static_cast<Eigen::Index>(h) * C + c, t) = 1.0f;
      }
    return code;
  }

  void validate() const {
    const int H = heads();
    const int T = num_frames();
    check(C >= 2 && H >= 1 && T >= 1, "LatentCode: degenerate shape");
    check(soft.rows() == static_cast<Eigen::Index>(H) * C && soft.cols() == T,
          "LatentCode: soft shape mismatch");
    for (int t = 0; t < T; ++t) {
      for (int h = 0; h < H; ++h) {
        auto block = soft.col(t).segment(static_cast<Eigen::Index>(h) * C, C);
        check(block.minCoeff() >= 0.0f, "LatentCode: negative soft value");
        check(std::abs(block.sum() - 1.0f) < 1e-5f, "LatentCode: soft rows must sum to 1");
        Eigen::Index arg;
        block.maxCoeff(&arg);
        check(static_cast<int>(arg) == labels(h, t), "LatentCode: labels != argmax(soft)");
      }
    }
  }
};

inline constexpr uint32_t kLatcFormatVersion = 1;

inline void save_latent_code(const std::string& path, const LatentCode& code) {
  check(code.C <= 0xffff, "save_latent_code: C too large for u16 labels");
  BinaryWriter w;
  w.magic("LATC");
  w.u32(kLatcFormatVersion);
  w.u32(static_cast<uint32_t>(code.num_frames()));
  w.u32(static_cast<uint32_t>(code.heads()));
  for (int t = 0; t < code.num_frames(); ++t)
    for (int h = 0; h < code.heads(); ++h) w.u16(static_cast<uint16_t>(code.labels(h, t)));
  write_file_bytes(path, w.bytes());
}

// Needs C to rebuild the one-hot form (the file stores labels only).
inline LatentCode load_latent_code(const std::string& path, int C) {
  BinaryReader r(read_file_bytes(path));
  r.expect_magic("LATC", path);
  const uint32_t ver = r.u32();
  check_io(ver == kLatcFormatVersion, path + ": unsupported LATC version");
  const uint32_t T = r.u32();
  const uint32_t H = r.u32();
  check_io(T >= 1 && H >= 1, path + ": degenerate LATC dimensions");
  Eigen::MatrixXi labels(H, T);
  for (uint32_t t = 0; t < T; ++t)
    for (uint32_t h = 0; h < H; ++h) labels(h, t) = r.u16();
  check_io(r.at_end(), path + ": trailing bytes after LATC payload");
  return LatentCode::from_labels(labels, C);
}

}  // namespace speechmesh
