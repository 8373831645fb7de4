#pragma once

// Mesh file formats.
//   MSHS: "MSHS", u32 version=1, u32 T, u32 V, f32 LE payload T*V*3 (mm)
//   MSHT: "MSHT", u32 version=1, u32 V, f32 LE payload V*3 (mm),
//         then V bytes of region-label codes
//           0=other, 1=mouth, 2=upper_face, 3=eyelid, 4=lip
// Plus a per-frame OBJ export (point cloud, no faces) for external viewers.

#include <filesystem>
#include <string>
#include <vector>

#include "speechmesh/core/binio.hpp"
#include "speechmesh/geometry/mesh.hpp"

namespace speechmesh {

inline constexpr uint32_t kMeshFormatVersion = 1;

inline void save_mesh_sequence(const std::string& path, const MeshSequence& seq) {
  seq.validate();
  BinaryWriter w;
  w.magic("MSHS");
  w.u32(kMeshFormatVersion);
  w.u32(static_cast<uint32_t>(seq.num_frames));
  w.u32(static_cast<uint32_t>(seq.num_vertices));
  w.f32_array(seq.data.data(), seq.data.size());
  write_file_bytes(path, w.bytes());
}

inline MeshSequence load_mesh_sequence(const std::string& path) {
  BinaryReader r(read_file_bytes(path));
  r.expect_magic("MSHS", path);
  const uint32_t ver = r.u32();
  check_io(ver == kMeshFormatVersion, path + ": unsupported MSHS version " + std::to_string(ver));
  MeshSequence seq;
  seq.num_frames = static_cast<int>(r.u32());
  seq.num_vertices = static_cast<int>(r.u32());
  check_io(seq.num_frames >= 1 && seq.num_vertices >= 1, path + ": degenerate MSHS dimensions");
  seq.data.resize(static_cast<size_t>(seq.num_frames) * seq.num_vertices * 3);
  r.f32_array(seq.data.data(), seq.data.size());
  check_io(r.at_end(), path + ": trailing bytes after MSHS payload");
  return seq;
}

inline void save_template_mesh(const std::string& path, const TemplateMesh& mesh) {
  mesh.validate();
  BinaryWriter w;
  w.magic("MSHT");
  w.u32(kMeshFormatVersion);
  const int V = mesh.vertex_count();
  w.u32(static_cast<uint32_t>(V));
  w.f32_array(mesh.vertices.data(), mesh.vertices.size());
  for (int v = 0; v < V; ++v) w.u8(static_cast<uint8_t>(mesh.labels[v]));
  write_file_bytes(path, w.bytes());
}

inline TemplateMesh load_template_mesh(const std::string& path) {
  BinaryReader r(read_file_bytes(path));
  r.expect_magic("MSHT", path);
  const uint32_t ver = r.u32();
  check_io(ver == kMeshFormatVersion, path + ": unsupported MSHT version " + std::to_string(ver));
  TemplateMesh mesh;
  const uint32_t V = r.u32();
  check_io(V >= 1, path + ": degenerate MSHT vertex count");
  mesh.vertices.resize(static_cast<size_t>(V) * 3);
  r.f32_array(mesh.vertices.data(), mesh.vertices.size());
  mesh.labels.resize(V);
  for (uint32_t v = 0; v < V; ++v) {
    const uint8_t code = r.u8();
    check_io(code <= 4, path + ": invalid region label code " + std::to_string(code));
    mesh.labels[v] = static_cast<RegionLabel>(code);
  }
  check_io(r.at_end(), path + ": trailing bytes after MSHT payload");
  mesh.identity_id = std::filesystem::path(path).stem().string();
  return mesh;
}

// Writes <prefix>_000000.obj ... one point-cloud OBJ per frame.
inline void export_obj_frames(const std::string& prefix, const MeshSequence& seq) {
  seq.validate();
  for (int t = 0; t < seq.num_frames; ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "_%06d.obj", t);
    std::string body;
    body.reserve(static_cast<size_t>(seq.num_vertices) * 32);
    const float* f = seq.frame(t);
    char line[96];
    for (int v = 0; v < seq.num_vertices; ++v) {
      std::snprintf(line, sizeof(line), "v %.6f %.6f %.6f\n", f[3 * v], f[3 * v + 1], f[3 * v + 2]);
      body += line;
    }
    write_file_bytes(prefix + name, std::vector<char>(body.begin(), body.end()));
  }
}

}  // namespace speechmesh
