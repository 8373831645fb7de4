#pragma once

// Evaluation: lip error, latent cluster separation, modality influence
// maps, plus the VMAP per-vertex scalar export and small stats helpers.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "speechmesh/core/binio.hpp"
#include "speechmesh/core/check.hpp"
#include "speechmesh/core/rng.hpp"
#include "speechmesh/geometry/mesh.hpp"
#include "speechmesh/model/latent_model.hpp"
#include "speechmesh/synth/dataset.hpp"
#include "speechmesh/train/losses.hpp"

namespace speechmesh {

// Per frame the maximum Euclidean error over lip vertices, averaged
// over frames (mm).
inline double lip_error(const MeshSequence& pred, const MeshSequence& gt, const VertexMask& lip) {
  check(pred.num_frames == gt.num_frames && pred.num_vertices == gt.num_vertices,
        "lip_error: shape mismatch");
  check(lip.vertex_count() == pred.num_vertices, "lip_error: mask size mismatch");
  std::vector<int> lip_verts;
  for (int v = 0; v < lip.vertex_count(); ++v)
    if (lip.weights[v] > 0.0f) lip_verts.push_back(v);
  check(!lip_verts.empty(), "lip_error: empty lip vertex set");

  double acc = 0.0;
  for (int t = 0; t < pred.num_frames; ++t) {
    const float* p = pred.frame(t);
    const float* g = gt.frame(t);
    double worst = 0.0;
    for (int v : lip_verts) {
      const double dx = static_cast<double>(p[3 * v]) - g[3 * v];
      const double dy = static_cast<double>(p[3 * v + 1]) - g[3 * v + 1];
      const double dz = static_cast<double>(p[3 * v + 2]) - g[3 * v + 2];
      worst = std::max(worst, std::sqrt(dx * dx + dy * dy + dz * dz));
    }
    acc += worst;
  }
  return acc / pred.num_frames;
}

inline double pearson_correlation(const std::vector<float>& a, const std::vector<float>& b) {
  check(a.size() == b.size() && a.size() >= 2, "pearson_correlation: need matched series");
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

// ---------------------------------------------------------------------------
// Latent cluster analysis: codes from (fixed expression, varied audio)
// vs (fixed audio, varied expression), each represented by the
// time-averaged soft one-hot concatenated over heads; a linear
// classifier is fitted on half the points and scored on the held-out
// half; 2D projection by principal components.
// ---------------------------------------------------------------------------

struct ClusterAnalysis {
  double accuracy = 0.0;
  std::vector<std::array<float, 2>> projections;
  std::vector<int> tags;  // 0 = varied-audio set, 1 = varied-expression set
};

namespace detail {

inline Eigen::VectorXd code_feature(const LatentCode& code) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(code.soft.rows());
  for (int t = 0; t < code.num_frames(); ++t) f += code.soft.col(t).cast<double>();
  return f / code.num_frames();
}

// Plain full-batch logistic regression; deterministic.
inline double fit_linear_and_score(const std::vector<Eigen::VectorXd>& xs,
                                   const std::vector<int>& ys, uint64_t seed) {
  const size_t n = xs.size();
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = Rng(seed).child("cluster_split");
  for (size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
  const size_t n_train = n / 2;

  const Eigen::Index D = xs.front().size();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(D);
  double b = 0.0;
  const double lr = 0.5;
  for (int it = 0; it < 400; ++it) {
    Eigen::VectorXd gw = Eigen::VectorXd::Zero(D);
    double gb = 0.0;
    for (size_t i = 0; i < n_train; ++i) {
      const auto& x = xs[order[i]];
      const double y = ys[order[i]];
      const double p = 1.0 / (1.0 + std::exp(-(w.dot(x) + b)));
      gw += (p - y) * x;
      gb += p - y;
    }
    w -= lr * gw / static_cast<double>(n_train);
    b -= lr * gb / static_cast<double>(n_train);
  }
  size_t correct = 0;
  for (size_t i = n_train; i < n; ++i) {
    const auto& x = xs[order[i]];
    const int pred = (w.dot(x) + b) > 0.0 ? 1 : 0;
    if (pred == ys[order[i]]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n - n_train);
}

}  // namespace detail

inline ClusterAnalysis latent_cluster_analysis(LatentModelF& model, const LoadedDataset& ds,
                                               int n_samples, uint64_t seed = 0,
                                               const std::string& split = "train") {
  check(n_samples >= 10, "latent_cluster_analysis: need at least 10 samples per set");
  check(model.hyper().latent == LatentKind::kCategorical,
        "latent_cluster_analysis: categorical model required");
  check(model.hyper().use_audio, "latent_cluster_analysis: model has no audio pathway");
  const std::vector<int> idx = ds.sequence_indices(split);
  check(static_cast<int>(idx.size()) >= 2, "latent_cluster_analysis: need >= 2 sequences");

  // Distinct anchors for the two sets.
  const LoadedSequence& fixed_expr = ds.sequences[idx[0]];
  const LoadedSequence& fixed_audio = ds.sequences[idx[idx.size() / 2]];

  std::vector<Eigen::VectorXd> feats;
  std::vector<int> tags;
  for (int i = 0; i < n_samples; ++i) {
    const LoadedSequence& vary = ds.sequences[idx[(i + 1) % idx.size()]];
    const MeshSequence x = crop_or_pad(fixed_expr.meshes, vary.features.num_frames);
    const LatentCode code = model.encode(x, &vary.features);
    feats.push_back(detail::code_feature(code));
    tags.push_back(0);
  }
  for (int i = 0; i < n_samples; ++i) {
    const LoadedSequence& vary = ds.sequences[idx[(i + 1) % idx.size()]];
    const AudioFeatures a = crop_or_pad(fixed_audio.features, vary.meshes.num_frames);
    const LatentCode code = model.encode(vary.meshes, &a);
    feats.push_back(detail::code_feature(code));
    tags.push_back(1);
  }

  ClusterAnalysis out;
  out.tags = tags;
  out.accuracy = detail::fit_linear_and_score(feats, tags, seed);

  // PCA to 2D for visualization.
  const Eigen::Index D = feats.front().size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(D);
  for (const auto& f : feats) mean += f;
  mean /= static_cast<double>(feats.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(D, D);
  for (const auto& f : feats) {
    const Eigen::VectorXd d = f - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(feats.size());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd p1 = eig.eigenvectors().col(D - 1);
  Eigen::VectorXd p2 = Eigen::VectorXd::Zero(D);
  if (D >= 2) p2 = eig.eigenvectors().col(D - 2);
  for (const auto& f : feats) {
    const Eigen::VectorXd d = f - mean;
    out.projections.push_back(
        {static_cast<float>(p1.dot(d)), static_cast<float>(p2.dot(d))});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Modality influence maps: per vertex, the mean displacement magnitude
// of the decoded output across variations of one modality with the
// other fixed (deviation from the across-variation mean).
// ---------------------------------------------------------------------------

struct InfluenceMaps {
  std::vector<float> audio_influence;  // V
  std::vector<float> expr_influence;   // V
};

namespace detail {

inline std::vector<float> influence_from_outputs(const std::vector<MeshSequence>& outs) {
  const int V = outs.front().num_vertices;
  const int T = outs.front().num_frames;
  const size_t n = outs.size();
  std::vector<double> mean(static_cast<size_t>(T) * V * 3, 0.0);
  for (const auto& o : outs)
    for (size_t i = 0; i < mean.size(); ++i) mean[i] += o.data[i];
  for (double& m : mean) m /= static_cast<double>(n);
  std::vector<double> acc(V, 0.0);
  for (const auto& o : outs) {
    for (int t = 0; t < T; ++t)
      for (int v = 0; v < V; ++v) {
        const size_t base = (static_cast<size_t>(t) * V + v) * 3;
        const double dx = o.data[base] - mean[base];
        const double dy = o.data[base + 1] - mean[base + 1];
        const double dz = o.data[base + 2] - mean[base + 2];
        acc[v] += std::sqrt(dx * dx + dy * dy + dz * dz);
      }
  }
  std::vector<float> out(V);
  for (int v = 0; v < V; ++v)
    out[v] = static_cast<float>(acc[v] / (static_cast<double>(n) * T));
  return out;
}

}  // namespace detail

inline InfluenceMaps modality_influence_map(LatentModelF& model, const LoadedDataset& ds,
                                            int n_samples = 12,
                                            const std::string& split = "train") {
  check(model.hyper().use_audio, "modality_influence_map: model has no audio pathway");
  const std::vector<int> idx = ds.sequence_indices(split);
  check(static_cast<int>(idx.size()) >= 2, "modality_influence_map: need >= 2 sequences");
  n_samples = std::min<int>(n_samples, static_cast<int>(idx.size()));

  const LoadedSequence& anchor = ds.sequences[idx[0]];
  const TemplateMesh& tpl = ds.templates[anchor.identity_index];
  const int T = anchor.meshes.num_frames;

  std::vector<MeshSequence> audio_outs, expr_outs;
  for (int i = 0; i < n_samples; ++i) {
    const LoadedSequence& vary = ds.sequences[idx[(i + 1) % idx.size()]];
    const AudioFeatures a = crop_or_pad(vary.features, T);
    audio_outs.push_back(model.decode(tpl, model.encode(anchor.meshes, &a), anchor.meshes.fps));
    const MeshSequence x = crop_or_pad(vary.meshes, T);
    expr_outs.push_back(
        model.decode(tpl, model.encode(x, &anchor.features), anchor.meshes.fps));
  }

  InfluenceMaps maps;
  // Varying audio with expression fixed -> audio influence, and the
  // converse for expression.
  maps.audio_influence = detail::influence_from_outputs(audio_outs);
  maps.expr_influence = detail::influence_from_outputs(expr_outs);
  return maps;
}

// ---------------------------------------------------------------------------
// VMAP per-vertex scalar file: "VMAP", u32 version=1, u32 V, f32 payload.
// ---------------------------------------------------------------------------

inline constexpr uint32_t kVmapFormatVersion = 1;

inline void save_vertex_map(const std::string& path, const std::vector<float>& values) {
  BinaryWriter w;
  w.magic("VMAP");
  w.u32(kVmapFormatVersion);
  w.u32(static_cast<uint32_t>(values.size()));
  w.f32_array(values.data(), values.size());
  write_file_bytes(path, w.bytes());
}

inline std::vector<float> load_vertex_map(const std::string& path) {
  BinaryReader r(read_file_bytes(path));
  r.expect_magic("VMAP", path);
  const uint32_t ver = r.u32();
  check_io(ver == kVmapFormatVersion, path + ": unsupported VMAP version");
  const uint32_t V = r.u32();
  std::vector<float> values(V);
  r.f32_array(values.data(), V);
  check_io(r.at_end(), path + ": trailing bytes after VMAP payload");
  return values;
}

// Machine-readable metric report: "key = value" lines.
inline void save_report(const std::string& path,
                        const std::vector<std::pair<std::string, double>>& metrics) {
  std::string body;
  char line[128];
  for (const auto& [key, value] : metrics) {
    std::snprintf(line, sizeof(line), "%s = %.6f\n", key.c_str(), value);
    body += line;
  }
  write_file_bytes(path, std::vector<char>(body.begin(), body.end()));
}

}  // namespace speechmesh
