#pragma once

// Procedural face rig: a canonical labeled vertex layout plus fixed
// per-vertex displacement fields for the three ground-truth tracks
// (lip opening, blink, brow raise). The rig is what makes the synthetic
// data decidable: the same fields that generate motion are used to
// measure it back out of any mesh sequence by least-squares projection.

#include <cmath>
#include <cstdint>
#include <vector>

#include "speechmesh/core/check.hpp"
#include "speechmesh/core/rng.hpp"
#include "speechmesh/geometry/mesh.hpp"

namespace speechmesh {

struct RegionCounts {
  int lip = 24;
  int mouth = 36;
  int upper_face = 120;
  int eyelid = 20;
  int other = 40;

  int total() const { return lip + mouth + upper_face + eyelid + other; }
  void validate() const {
    check(lip > 0 && mouth > 0 && upper_face > 0 && eyelid > 0 && other > 0,
          "RegionCounts: all region counts must be > 0");
  }
};

class FaceRig {
 public:
  explicit FaceRig(const RegionCounts& counts = RegionCounts{}) : counts_(counts) {
    counts.validate();
    build_layout();
    build_fields();
  }

  int vertex_count() const { return counts_.total(); }
  const std::vector<RegionLabel>& labels() const { return labels_; }
  const std::vector<float>& canonical() const { return canonical_; }
  const std::vector<float>& lip_field() const { return lip_field_; }
  const std::vector<float>& blink_field() const { return blink_field_; }
  const std::vector<float>& brow_field() const { return brow_field_; }

  // Deterministic per-seed identity: smooth low-frequency shape offsets
  // on the canonical layout.
  TemplateMesh make_identity(uint64_t seed, const std::string& identity_id) const {
    Rng rng = Rng(seed).child("identity");
    const double width = 1.0 + 0.06 * rng.normal();
    const double height = 1.0 + 0.06 * rng.normal();
    const double depth = 1.0 + 0.05 * rng.normal();
    const double jaw = 1.0 + 0.08 * rng.normal();
    const double brow_shift = 2.5 * rng.normal();
    const double bump = 2.0 * rng.normal();
    const double cheek = 1.5 * rng.normal();

    TemplateMesh mesh;
    mesh.identity_id = identity_id;
    mesh.labels = labels_;
    const int V = vertex_count();
    mesh.vertices.resize(static_cast<size_t>(V) * 3);
    for (int v = 0; v < V; ++v) {
      double x = canonical_[3 * v + 0];
      double y = canonical_[3 * v + 1];
      double z = canonical_[3 * v + 2];
      x *= width;
      y *= height;
      z *= depth;
      if (y < -20.0) x *= jaw;                                   // jaw width
      if (labels_[v] == RegionLabel::kUpperFace && y > 25.0) y += brow_shift;
      z += bump * std::sin(M_PI * x / 140.0) * std::cos(M_PI * y / 200.0);
      x += cheek * std::sin(M_PI * y / 180.0);
      mesh.vertices[3 * v + 0] = static_cast<float>(x);
      mesh.vertices[3 * v + 1] = static_cast<float>(y);
      mesh.vertices[3 * v + 2] = static_cast<float>(z);
    }
    return mesh;
  }

  // frames[t] = template + lip[t]*lip_field + blink[t]*blink_field + brow[t]*brow_field
  MeshSequence apply_tracks(const TemplateMesh& identity, const std::vector<float>& lip_mm,
                            const std::vector<float>& blink, const std::vector<float>& brow,
                            float fps = 30.0f) const {
    const int V = vertex_count();
    check(identity.vertex_count() == V, "apply_tracks: identity vertex count mismatch");
    const int T = static_cast<int>(lip_mm.size());
    check(T >= 1 && blink.size() == lip_mm.size() && brow.size() == lip_mm.size(),
          "apply_tracks: track lengths differ or empty");
    MeshSequence seq = MeshSequence::zeros(T, V, fps);
    for (int t = 0; t < T; ++t) {
      float* f = seq.frame(t);
      for (int i = 0; i < V * 3; ++i) {
        f[i] = identity.vertices[i] + lip_mm[t] * lip_field_[i] + blink[t] * blink_field_[i] +
               brow[t] * brow_field_[i];
      }
    }
    return seq;
  }

  // Least-squares field coefficient per frame: recovers the generating
  // track exactly on synthetic data, and a best-fit reading on model
  // output. Restricted to the vertices where the field lives.
  std::vector<float> measure_track(const MeshSequence& seq, const TemplateMesh& identity,
                                   const std::vector<float>& field) const {
    const int V = vertex_count();
    check(seq.num_vertices == V && identity.vertex_count() == V,
          "measure_track: vertex count mismatch");
    double denom = 0.0;
    for (int i = 0; i < V * 3; ++i) denom += static_cast<double>(field[i]) * field[i];
    check(denom > 0.0, "measure_track: empty field");
    std::vector<float> track(seq.num_frames);
    for (int t = 0; t < seq.num_frames; ++t) {
      const float* f = seq.frame(t);
      double num = 0.0;
      for (int i = 0; i < V * 3; ++i)
        num += static_cast<double>(field[i]) * (f[i] - identity.vertices[i]);
      track[t] = static_cast<float>(num / denom);
    }
    return track;
  }

  std::vector<float> measure_lip_opening(const MeshSequence& seq, const TemplateMesh& id) const {
    return measure_track(seq, id, lip_field_);
  }
  std::vector<float> measure_blink_state(const MeshSequence& seq, const TemplateMesh& id) const {
    return measure_track(seq, id, blink_field_);
  }
  std::vector<float> measure_brow_raise(const MeshSequence& seq, const TemplateMesh& id) const {
    return measure_track(seq, id, brow_field_);
  }

 private:
  void build_layout() {
    const int V = counts_.total();
    labels_.resize(V);
    canonical_.resize(static_cast<size_t>(V) * 3);
    int v = 0;
    auto put = [&](RegionLabel r, double x, double y, double z) {
      labels_[v] = r;
      canonical_[3 * v + 0] = static_cast<float>(x);
      canonical_[3 * v + 1] = static_cast<float>(y);
      canonical_[3 * v + 2] = static_cast<float>(z);
      ++v;
    };

    // Lips: inner ring around the mouth center, upper half then lower.
    const double mx = 0.0, my = -40.0, mz = 80.0;
    for (int i = 0; i < counts_.lip; ++i) {
      const double a = 2.0 * M_PI * i / counts_.lip;
      put(RegionLabel::kLip, mx + 25.0 * std::cos(a), my + 8.0 * std::sin(a),
          mz - 2.0 * std::abs(std::cos(a)));
    }
    // Mouth area: two outer rings.
    for (int i = 0; i < counts_.mouth; ++i) {
      const bool outer = i >= counts_.mouth / 2;
      const int n = outer ? counts_.mouth - counts_.mouth / 2 : counts_.mouth / 2;
      const int j = outer ? i - counts_.mouth / 2 : i;
      const double a = 2.0 * M_PI * j / n;
      const double rx = outer ? 42.0 : 33.0, ry = outer ? 22.0 : 14.0;
      put(RegionLabel::kMouth, mx + rx * std::cos(a), my + ry * std::sin(a),
          mz - 4.0 * std::abs(std::cos(a)));
    }
    // Upper face: grid over brows/eyes/forehead/cheeks (y in [0, 80]).
    {
      const int cols = 12;
      const int rows = (counts_.upper_face + cols - 1) / cols;
      int placed = 0;
      for (int r = 0; r < rows && placed < counts_.upper_face; ++r) {
        for (int c = 0; c < cols && placed < counts_.upper_face; ++c) {
          const double x = -60.0 + 120.0 * c / (cols - 1);
          const double y = 0.0 + 80.0 * r / (rows > 1 ? rows - 1 : 1);
          const double z = 86.0 - x * x / 160.0 - (y - 30.0) * (y - 30.0) / 300.0;
          put(RegionLabel::kUpperFace, x, y, z);
          ++placed;
        }
      }
    }
    // Eyelids: small arcs at the two eye centers.
    for (int i = 0; i < counts_.eyelid; ++i) {
      const bool right = i >= counts_.eyelid / 2;
      const int n = right ? counts_.eyelid - counts_.eyelid / 2 : counts_.eyelid / 2;
      const int j = right ? i - counts_.eyelid / 2 : i;
      const double ex = right ? 25.0 : -25.0;
      const double a = M_PI * (n > 1 ? static_cast<double>(j) / (n - 1) : 0.5);
      put(RegionLabel::kEyelid, ex + 10.0 * std::cos(a), 27.0 + 4.0 * std::sin(a), 83.0);
    }
    // Other: chin arc and neck/side points.
    for (int i = 0; i < counts_.other; ++i) {
      const double s = counts_.other > 1 ? static_cast<double>(i) / (counts_.other - 1) : 0.5;
      const double a = M_PI * s;
      put(RegionLabel::kOther, 55.0 * std::cos(a), -68.0 - 20.0 * std::sin(a),
          55.0 + 20.0 * std::sin(a));
    }
    check(v == V, "FaceRig: layout did not fill all vertices");
  }

  void build_fields() {
    const int V = counts_.total();
    lip_field_.assign(static_cast<size_t>(V) * 3, 0.0f);
    blink_field_.assign(static_cast<size_t>(V) * 3, 0.0f);
    brow_field_.assign(static_cast<size_t>(V) * 3, 0.0f);
    const double my = -40.0;
    for (int v = 0; v < V; ++v) {
      const double x = canonical_[3 * v + 0];
      const double y = canonical_[3 * v + 1];
      switch (labels_[v]) {
        case RegionLabel::kLip:
          // Unit lip field: lower lip carries the opening, upper lip a
          // slight counter-motion; taper toward the corners.
          {
            const double taper = 1.0 - std::min(1.0, std::abs(x) / 30.0) * 0.7;
            if (y < my)
              lip_field_[3 * v + 1] = static_cast<float>(-1.0 * taper);
            else
              lip_field_[3 * v + 1] = static_cast<float>(0.18 * taper);
            lip_field_[3 * v + 2] = static_cast<float>(-0.12 * taper);
          }
          break;
        case RegionLabel::kMouth:
          if (y < my) {
            const double taper = 1.0 - std::min(1.0, std::abs(x) / 45.0) * 0.8;
            lip_field_[3 * v + 1] = static_cast<float>(-0.55 * taper);
            lip_field_[3 * v + 2] = static_cast<float>(-0.08 * taper);
          }
          break;
        case RegionLabel::kOther:
          // Chin follows the jaw, weakly.
          if (y < -55.0) lip_field_[3 * v + 1] = -0.3f;
          break;
        case RegionLabel::kEyelid:
          // Full blink travel: 5mm of lid closure.
          blink_field_[3 * v + 1] = -5.0f;
          blink_field_[3 * v + 2] = 0.5f;
          break;
        case RegionLabel::kUpperFace:
          // Brow band raises; full raise is 4mm.
          if (y > 30.0 && y < 50.0) {
            brow_field_[3 * v + 1] = 4.0f;
            brow_field_[3 * v + 2] = 0.8f;
          }
          break;
      }
    }
  }

  RegionCounts counts_;
  std::vector<RegionLabel> labels_;
  std::vector<float> canonical_;
  std::vector<float> lip_field_, blink_field_, brow_field_;
};

}  // namespace speechmesh
