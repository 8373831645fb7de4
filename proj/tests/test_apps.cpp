// Pipeline-level contracts on untrained (randomly initialized) models:
// composition, shapes, determinism, input immutability.

#include <catch2/catch_amalgamated.hpp>
#include <filesystem>

#include "speechmesh/apps/pipelines.hpp"
#include "speechmesh/synth/dataset.hpp"

using namespace speechmesh;

namespace {

struct Fixture {
  SynthConfig synth_cfg;
  FaceRig rig{RegionCounts{4, 6, 12, 4, 4}};
  LatentHyper hp;
  PriorHyper php;
  LatentModelF latent;
  PriorModelF prior;
  TemplateMesh tpl_a, tpl_b;
  Waveform wave;
  MeshSequence perf;

  Fixture() {
    synth_cfg.counts = RegionCounts{4, 6, 12, 4, 4};
    hp.C = 4;
    hp.H = 2;
    hp.V = rig.vertex_count();
    hp.tick_proj = 4;
    hp.tick_pool = 10;
    hp.d_audio = 8;
    hp.d_expr = 8;
    hp.d_fuse = 8;
    hp.code_embed = 3;
    hp.dec_w1 = 10;
    hp.dec_w2 = 8;
    hp.dec_w3 = 6;
    hp.dec_lstm = 8;
    latent.init(hp, 1);
    php.C = hp.C;
    php.H = hp.H;
    php.embed = 4;
    php.width = 6;
    php.cond_tick_proj = 4;
    php.cond_tick_pool = 10;
    php.cond_dim = 4;
    prior.init(php, 2);

    tpl_a = rig.make_identity(10, "a");
    tpl_b = rig.make_identity(11, "b");
    wave = synth_audio(synth_cfg, 3, 1.5);
    perf = synth_sequence(synth_cfg, rig, tpl_a, wave, 4).meshes;
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("animate: length arithmetic, determinism, input immutability") {
  auto& f = fixture();
  const std::vector<float> wave_before = f.wave.samples;
  const MeshSequence out = animate(f.latent, f.prior, f.tpl_a, f.wave, 7);
  CHECK(out.num_frames == num_visual_frames(f.wave));
  CHECK(out.num_frames == static_cast<int>(f.wave.samples.size() * 30 / 16000));
  CHECK(out.num_vertices == f.rig.vertex_count());
  out.validate();
  CHECK(f.wave.samples == wave_before);

  const MeshSequence out2 = animate(f.latent, f.prior, f.tpl_a, f.wave, 7);
  CHECK(out.data == out2.data);
  const MeshSequence out3 = animate(f.latent, f.prior, f.tpl_a, f.wave, 8);
  bool differs = false;
  for (size_t i = 0; i < out.data.size(); ++i)
    if (out.data[i] != out3.data[i]) differs = true;
  CHECK(differs);
}

TEST_CASE("animate equals the explicit stage composition") {
  auto& f = fixture();
  const MeshSequence out = animate(f.latent, f.prior, f.tpl_a, f.wave, 5);
  const int T = num_visual_frames(f.wave);
  const AudioFeatures feat = mel_spectrogram(f.wave, T);
  const LatentCode code = f.prior.sample(feat, 5, 1.0);
  const MeshSequence manual = f.latent.decode(f.tpl_a, code);
  CHECK(out.data == manual.data);
}

TEST_CASE("animate rejects mismatched checkpoints") {
  auto& f = fixture();
  PriorHyper other = f.php;
  other.C = f.hp.C + 1;
  PriorModelF bad_prior(other, 3);
  CHECK_THROWS_AS(animate(f.latent, bad_prior, f.tpl_a, f.wave, 1), contract_error);

  TemplateMesh bad_tpl = f.tpl_a;
  bad_tpl.vertices.resize(bad_tpl.vertices.size() + 3);
  bad_tpl.labels.push_back(RegionLabel::kOther);
  CHECK_THROWS_AS(animate(f.latent, f.prior, bad_tpl, f.wave, 1), contract_error);
}

TEST_CASE("retarget: output carries the target identity's vertex count") {
  auto& f = fixture();
  const MeshSequence out = retarget(f.latent, f.perf, f.wave, f.tpl_b);
  CHECK(out.num_frames == f.perf.num_frames);
  CHECK(out.num_vertices == f.tpl_b.vertex_count());

  // Self-retarget equals the plain reconstruction.
  const MeshSequence self = retarget(f.latent, f.perf, f.wave, f.tpl_a);
  const AudioFeatures feat = mel_spectrogram(f.wave, f.perf.num_frames);
  const MeshSequence recon = f.latent.reconstruct(f.tpl_a, f.perf, &feat);
  CHECK(self.data == recon.data);
}

TEST_CASE("dub: degenerate dub equals retarget; length mismatch crops") {
  auto& f = fixture();
  const MeshSequence dubbed = dub(f.latent, f.perf, f.wave, f.tpl_a);
  const MeshSequence retargeted = retarget(f.latent, f.perf, f.wave, f.tpl_a);
  CHECK(dubbed.data == retargeted.data);

  // Shorter new audio: crops to the audio length and reports it.
  Waveform short_wave = f.wave;
  short_wave.samples.resize(short_wave.samples.size() / 2);
  bool cropped = false;
  const MeshSequence out = dub(f.latent, f.perf, short_wave, f.tpl_a, &cropped);
  CHECK(cropped);
  CHECK(out.num_frames == num_visual_frames(short_wave));
}
