#pragma once

// Core mesh containers. Frames and vertices are stored flat in the same
// order as the on-disk payloads (frame-major, then vertex, then x/y/z),
// all coordinates in millimeters.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "speechmesh/core/check.hpp"

namespace speechmesh {

enum class RegionLabel : uint8_t {
  kOther = 0,
  kMouth = 1,
  kUpperFace = 2,
  kEyelid = 3,
  kLip = 4,
};

inline const char* region_name(RegionLabel r) {
  switch (r) {
    case RegionLabel::kOther: return "other";
    case RegionLabel::kMouth: return "mouth";
    case RegionLabel::kUpperFace: return "upper_face";
    case RegionLabel::kEyelid: return "eyelid";
    case RegionLabel::kLip: return "lip";
  }
  return "?";
}

struct TemplateMesh {
  std::vector<float> vertices;  // V*3, mm
  std::vector<RegionLabel> labels;
  std::string identity_id;

  int vertex_count() const { return static_cast<int>(labels.size()); }
  float* vertex(int v) { return vertices.data() + 3 * v; }
  const float* vertex(int v) const { return vertices.data() + 3 * v; }

  void validate() const {
    check(!labels.empty(), "TemplateMesh: V must be > 0");
    check(vertices.size() == labels.size() * 3,
          "TemplateMesh: vertex array size does not match label count");
    for (float c : vertices) check(std::isfinite(c), "TemplateMesh: non-finite coordinate");
  }
};

struct MeshSequence {
  int num_frames = 0;   // T
  int num_vertices = 0; // V
  float fps = 30.0f;
  std::vector<float> data;  // T*V*3, mm

  static MeshSequence zeros(int T, int V, float fps = 30.0f) {
    MeshSequence s;
    s.num_frames = T;
    s.num_vertices = V;
    s.fps = fps;
    s.data.assign(static_cast<size_t>(T) * V * 3, 0.0f);
    return s;
  }

  float& at(int t, int v, int k) { return data[(static_cast<size_t>(t) * num_vertices + v) * 3 + k]; }
  float at(int t, int v, int k) const { return data[(static_cast<size_t>(t) * num_vertices + v) * 3 + k]; }
  float* frame(int t) { return data.data() + static_cast<size_t>(t) * num_vertices * 3; }
  const float* frame(int t) const { return data.data() + static_cast<size_t>(t) * num_vertices * 3; }

  void validate() const {
    check(num_frames >= 1, "MeshSequence: T must be >= 1");
    check(num_vertices >= 1, "MeshSequence: V must be >= 1");
    check(data.size() == static_cast<size_t>(num_frames) * num_vertices * 3,
          "MeshSequence: payload size mismatch");
    for (float c : data) check(std::isfinite(c), "MeshSequence: non-finite coordinate");
  }
};

enum class MaskKind : uint8_t { kUpper, kMouth, kEyelid, kLip };

struct VertexMask {
  std::vector<float> weights;  // V, >= 0
  MaskKind kind = MaskKind::kUpper;

  int vertex_count() const { return static_cast<int>(weights.size()); }
};

struct RegionMasks {
  VertexMask upper;
  VertexMask mouth;
  VertexMask eyelid;
  VertexMask lip;
};

// Mask construction per region label. Upper mask: w_high on
// upper_face/eyelid vertices, w_low on mouth/lip; the mouth mask is the
// mirror. Vertices labeled "other" get w_low in both. Eyelid and lip
// masks are binary.
inline RegionMasks build_masks(const std::vector<RegionLabel>& labels, float w_high, float w_low) {
  check(w_high > w_low && w_low >= 0.0f, "build_masks: requires w_high > w_low >= 0");
  const int V = static_cast<int>(labels.size());
  check(V > 0, "build_masks: empty label set");
  RegionMasks m;
  m.upper.kind = MaskKind::kUpper;
  m.mouth.kind = MaskKind::kMouth;
  m.eyelid.kind = MaskKind::kEyelid;
  m.lip.kind = MaskKind::kLip;
  m.upper.weights.resize(V);
  m.mouth.weights.resize(V);
  m.eyelid.weights.resize(V);
  m.lip.weights.resize(V);
  for (int v = 0; v < V; ++v) {
    float up = w_low, mo = w_low, ey = 0.0f, li = 0.0f;
    switch (labels[v]) {
      case RegionLabel::kUpperFace:
        up = w_high;
        break;
      case RegionLabel::kEyelid:
        up = w_high;
        ey = 1.0f;
        break;
      case RegionLabel::kMouth:
        mo = w_high;
        break;
      case RegionLabel::kLip:
        mo = w_high;
        li = 1.0f;
        break;
      case RegionLabel::kOther:
        break;
      default:
        throw contract_error("build_masks: unknown region label code " +
                             std::to_string(static_cast<int>(labels[v])) + " at vertex " +
                             std::to_string(v));
    }
    m.upper.weights[v] = up;
    m.mouth.weights[v] = mo;
    m.eyelid.weights[v] = ey;
    m.lip.weights[v] = li;
  }
  return m;
}

// Per-vertex motion statistic: population standard deviation of each
// coordinate, pooled over all frames of all sequences, then the
// Euclidean norm of the three per-coordinate deviations.
inline std::vector<float> vertex_motion_stddev(const std::vector<const MeshSequence*>& sequences) {
  check(!sequences.empty(), "vertex_motion_stddev: empty input");
  const int V = sequences.front()->num_vertices;
  size_t total_frames = 0;
  for (const MeshSequence* s : sequences) {
    check(s != nullptr && s->num_vertices == V, "vertex_motion_stddev: vertex counts differ");
    total_frames += static_cast<size_t>(s->num_frames);
  }
  check(total_frames > 0, "vertex_motion_stddev: no frames");

  std::vector<double> sum(static_cast<size_t>(V) * 3, 0.0);
  std::vector<double> sum_sq(static_cast<size_t>(V) * 3, 0.0);
  for (const MeshSequence* s : sequences) {
    for (int t = 0; t < s->num_frames; ++t) {
      const float* f = s->frame(t);
      for (int i = 0; i < V * 3; ++i) {
        const double x = f[i];
        sum[i] += x;
        sum_sq[i] += x * x;
      }
    }
  }
  const double n = static_cast<double>(total_frames);
  std::vector<float> out(V);
  for (int v = 0; v < V; ++v) {
    double acc = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double mean = sum[3 * v + k] / n;
      double var = sum_sq[3 * v + k] / n - mean * mean;
      if (var < 0.0) var = 0.0;  // rounding guard
      acc += var;
    }
    out[v] = static_cast<float>(std::sqrt(acc));
  }
  return out;
}

inline std::vector<float> vertex_motion_stddev(const std::vector<MeshSequence>& sequences) {
  std::vector<const MeshSequence*> ptrs;
  ptrs.reserve(sequences.size());
  for (const MeshSequence& s : sequences) ptrs.push_back(&s);
  return vertex_motion_stddev(ptrs);
}

// Mean over a region of a per-vertex scalar field.
inline double region_mean(const std::vector<float>& field, const std::vector<RegionLabel>& labels,
                          RegionLabel region) {
  check(field.size() == labels.size(), "region_mean: size mismatch");
  double acc = 0.0;
  int n = 0;
  for (size_t v = 0; v < labels.size(); ++v) {
    if (labels[v] == region) {
      acc += field[v];
      ++n;
    }
  }
  check(n > 0, std::string("region_mean: no vertices labeled ") + region_name(region));
  return acc / n;
}

}  // namespace speechmesh
