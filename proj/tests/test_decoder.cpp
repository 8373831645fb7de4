#include <catch2/catch_amalgamated.hpp>

#include "speechmesh/model/latent_model.hpp"

using namespace speechmesh;

namespace {

LatentHyper tiny_hyper() {
  LatentHyper hp;
  hp.C = 4;
  hp.H = 2;
  hp.V = 6;
  hp.mel_ticks = 8;
  hp.mel_bands = 10;
  hp.tick_proj = 4;
  hp.tick_pool = 2;
  hp.d_audio = 8;
  hp.d_expr = 8;
  hp.d_fuse = 8;
  hp.code_embed = 3;
  hp.dec_w1 = 10;
  hp.dec_w2 = 8;
  hp.dec_w3 = 6;
  hp.dec_lstm = 8;
  return hp;
}

TemplateMesh random_template(int V, uint64_t seed) {
  TemplateMesh tpl;
  tpl.identity_id = "t" + std::to_string(seed);
  tpl.labels.assign(V, RegionLabel::kOther);
  tpl.vertices.resize(static_cast<size_t>(V) * 3);
  Rng rng(seed);
  for (auto& v : tpl.vertices) v = static_cast<float>(rng.normal() * 20);
  return tpl;
}

LatentCode random_code(int H, int C, int T, uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXi labels(H, T);
  for (int t = 0; t < T; ++t)
    for (int h = 0; h < H; ++h) labels(h, t) = static_cast<int>(rng.uniform_index(C));
  return LatentCode::from_labels(labels, C);
}

}  // namespace

TEST_CASE("decode: shape contract and determinism") {
  const LatentHyper hp = tiny_hyper();
  LatentModel<float> model(hp, 1);
  const TemplateMesh tpl = random_template(hp.V, 2);
  const LatentCode code = random_code(hp.H, hp.C, 16, 3);

  const MeshSequence y1 = model.decode(tpl, code);
  CHECK(y1.num_frames == 16);
  CHECK(y1.num_vertices == hp.V);
  y1.validate();  // all finite

  const MeshSequence y2 = model.decode(tpl, code);
  CHECK(y1.data == y2.data);
}

TEST_CASE("decode: shape mismatches are rejected") {
  const LatentHyper hp = tiny_hyper();
  LatentModel<float> model(hp, 1);
  const TemplateMesh tpl_bad = random_template(hp.V + 2, 4);
  const LatentCode code = random_code(hp.H, hp.C, 4, 5);
  CHECK_THROWS_AS(model.decode(tpl_bad, code), contract_error);

  const TemplateMesh tpl = random_template(hp.V, 6);
  const LatentCode code_bad = random_code(hp.H + 1, hp.C, 4, 7);
  CHECK_THROWS_AS(model.decode(tpl, code_bad), contract_error);
}

TEST_CASE("decode: forward recurrence over frames") {
  const LatentHyper hp = tiny_hyper();
  LatentModel<float> model(hp, 8);
  const TemplateMesh tpl = random_template(hp.V, 9);
  LatentCode code = random_code(hp.H, hp.C, 12, 10);
  const MeshSequence y0 = model.decode(tpl, code);

  // Change the code at frame 7; frames before 7 must be bit-identical.
  LatentCode code2 = code;
  code2.labels(0, 7) = (code2.labels(0, 7) + 1) % hp.C;
  code2 = LatentCode::from_labels(code2.labels, hp.C);
  const MeshSequence y1 = model.decode(tpl, code2);
  for (int t = 0; t < 7; ++t)
    for (int i = 0; i < hp.V * 3; ++i) CHECK(y1.frame(t)[i] == y0.frame(t)[i]);
  bool later_differ = false;
  for (int t = 7; t < 12; ++t)
    for (int i = 0; i < hp.V * 3; ++i)
      if (y1.frame(t)[i] != y0.frame(t)[i]) later_differ = true;
  CHECK(later_differ);
}

TEST_CASE("decode: the template is not ignored") {
  const LatentHyper hp = tiny_hyper();
  LatentModel<float> model(hp, 11);
  const LatentCode code = random_code(hp.H, hp.C, 8, 12);
  const TemplateMesh t1 = random_template(hp.V, 13);
  const TemplateMesh t2 = random_template(hp.V, 14);
  const MeshSequence y1 = model.decode(t1, code);
  const MeshSequence y2 = model.decode(t2, code);
  double mean_diff = 0.0;
  for (size_t i = 0; i < y1.data.size(); ++i) mean_diff += std::abs(y1.data[i] - y2.data[i]);
  mean_diff /= static_cast<double>(y1.data.size());
  CHECK(mean_diff > 0.0);
}
