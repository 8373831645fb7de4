// Acceptance criteria 5, 8 and 9 on the default synthetic dataset:
// train the cross-modality categorical model and its prior once, then
// evaluate animation quality, disentanglement and dubbing. Also covers
// the trained-model examples: silent-audio animation, seed variation,
// and blink transfer under re-targeting.

#include <catch2/catch_amalgamated.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>

#include "speechmesh/apps/pipelines.hpp"
#include "speechmesh/eval/metrics.hpp"
#include "speechmesh/prior/prior_train.hpp"
#include "speechmesh/synth/dataset.hpp"
#include "speechmesh/train/trainer.hpp"

using namespace speechmesh;

namespace {

void report(const std::string& what, bool ok) {
  std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", what.c_str());
  std::fflush(stdout);
  REQUIRE(ok);
}

struct E2E {
  SynthConfig synth;
  FaceRig rig;
  std::filesystem::path root;
  LoadedDataset ds;
  LatentModelF latent;
  PriorModelF prior;
  double setup_minutes = 0.0;

  E2E() : rig(RegionCounts{}) {
    const auto t0 = std::chrono::steady_clock::now();
    synth.seed = 1234;  // defaults: 8 train + 2 test identities, 20x64 frames, V=240
    root = std::filesystem::temp_directory_path() / "sm_acceptance_e2e";
    std::filesystem::remove_all(root);
    generate_dataset(synth, root.string());
    ds = load_dataset(root.string(), /*with_waveforms=*/true);

    TrainConfig tc;
    tc.mode = TrainMode::kExprAudioXmod;
    tc.steps = 2200;
    tc.batch = 4;
    tc.crop_frames = 32;
    tc.lr = 1e-3;
    tc.seed = 11;
    tc.log_path = (root / "train_latent.log").string();
    latent = train_latent_model(tc, ds).model;
    save_checkpoint((root / "latent.ckpt").string(), latent.to_checkpoint());

    PriorTrainConfig pc;
    pc.hyper.C = latent.hyper().C;
    pc.hyper.H = latent.hyper().H;
    pc.steps = 900;
    pc.batch = 4;
    pc.crop_frames = 32;
    pc.lr = 1e-3;
    pc.seed = 12;
    pc.log_path = (root / "train_prior.log").string();
    const auto encoded = encode_dataset(latent, ds, "train");
    prior = train_prior(pc, encoded).model;
    save_checkpoint((root / "prior.ckpt").string(), prior.to_checkpoint());

    setup_minutes =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
    std::printf("-- e2e setup (dataset + latent + prior training): %.1f min\n", setup_minutes);
    std::fflush(stdout);
  }

  ~E2E() { std::filesystem::remove_all(root); }

  std::vector<int> eval_sequences(int per_identity) const {
    std::vector<int> out;
    std::map<int, int> taken;
    for (int i : ds.sequence_indices("test")) {
      const int id = ds.sequences[i].identity_index;
      if (taken[id] < per_identity) {
        out.push_back(i);
        ++taken[id];
      }
    }
    return out;
  }
};

E2E& fixture() {
  static E2E e2e;
  return e2e;
}

std::vector<float> head(const std::vector<float>& v, int n) {
  return std::vector<float>(v.begin(), v.begin() + std::min<size_t>(n, v.size()));
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST_CASE("criterion 5: toy end-to-end animation quality") {
  auto& f = fixture();
  const auto t0 = std::chrono::steady_clock::now();
  const VertexMask lip = build_masks(f.ds.templates[0].labels, 1.0f, 0.1f).lip;

  std::vector<double> static_errors, model_errors, lip_corrs;
  const auto eval_idx = f.eval_sequences(4);
  REQUIRE(eval_idx.size() == 8u);
  int k = 0;
  for (int i : eval_idx) {
    const LoadedSequence& s = f.ds.sequences[i];
    const TemplateMesh& tpl = f.ds.templates[s.identity_index];

    MeshSequence static_pred = MeshSequence::zeros(s.meshes.num_frames, s.meshes.num_vertices);
    for (int t = 0; t < s.meshes.num_frames; ++t)
      std::copy(tpl.vertices.begin(), tpl.vertices.end(), static_pred.frame(t));
    static_errors.push_back(lip_error(static_pred, s.meshes, lip));

    const MeshSequence animated = animate(f.latent, f.prior, tpl, s.wave, 900 + k);
    REQUIRE(animated.num_frames == s.meshes.num_frames);
    model_errors.push_back(lip_error(animated, s.meshes, lip));

    const std::vector<float> measured =
        head(f.rig.measure_lip_opening(animated, tpl), animated.num_frames);
    const std::vector<float> oracle =
        head(oracle_lip_trajectory(f.synth, s.wave), animated.num_frames);
    lip_corrs.push_back(pearson_correlation(measured, oracle));
    ++k;
  }
  const double mean_static =
      std::accumulate(static_errors.begin(), static_errors.end(), 0.0) / static_errors.size();
  const double mean_model =
      std::accumulate(model_errors.begin(), model_errors.end(), 0.0) / model_errors.size();
  const double mean_corr =
      std::accumulate(lip_corrs.begin(), lip_corrs.end(), 0.0) / lip_corrs.size();
  const double eval_minutes =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
  const double total_minutes = f.setup_minutes + eval_minutes;

  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "criterion 5: lip error %.2fmm vs static %.2fmm (need < %.2f); oracle corr %.3f "
                "(> 0.8); train+eval %.1f min (< 60)",
                mean_model, mean_static, 0.3 * mean_static, mean_corr, total_minutes);
  report(buf, mean_model < 0.3 * mean_static && mean_corr > 0.8 && total_minutes < 60.0);
}

TEST_CASE("criterion 8: disentanglement orderings and cluster separation") {
  auto& f = fixture();
  const auto& labels = f.ds.templates[0].labels;

  const InfluenceMaps maps = modality_influence_map(f.latent, f.ds, 12);
  const double audio_on_lip = region_mean(maps.audio_influence, labels, RegionLabel::kLip);
  const double audio_on_eyelid = region_mean(maps.audio_influence, labels, RegionLabel::kEyelid);
  const double expr_on_lip = region_mean(maps.expr_influence, labels, RegionLabel::kLip);
  const double expr_on_eyelid = region_mean(maps.expr_influence, labels, RegionLabel::kEyelid);

  const ClusterAnalysis clusters = latent_cluster_analysis(f.latent, f.ds, 40, 7);

  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "criterion 8: audio influence lip %.3f > eyelid %.3f; expr influence eyelid %.3f "
                "> lip %.3f; cluster accuracy %.3f (> 0.9)",
                audio_on_lip, audio_on_eyelid, expr_on_eyelid, expr_on_lip, clusters.accuracy);
  report(buf, audio_on_lip > audio_on_eyelid && expr_on_eyelid > expr_on_lip &&
                  clusters.accuracy > 0.9);
}

TEST_CASE("criterion 9: dubbing keeps the original upper face, follows the new audio") {
  auto& f = fixture();
  const auto test_idx = f.ds.sequence_indices("test");

  // Originals need enough blink mass for the eyelid correlation to be
  // well defined.
  std::vector<int> blinky;
  for (int i : test_idx) {
    const auto& blink = f.ds.sequences[i].tracks.blink_state;
    if (std::accumulate(blink.begin(), blink.end(), 0.0f) > 2.0f) blinky.push_back(i);
  }
  REQUIRE(blinky.size() >= 4u);

  std::vector<double> corr_new, corr_orig, corr_blink;
  for (size_t k = 0; k < std::min<size_t>(blinky.size(), 6); ++k) {
    const LoadedSequence& orig = f.ds.sequences[blinky[k]];
    const LoadedSequence& other = f.ds.sequences[test_idx[(k * 5 + 3) % test_idx.size()]];
    if (&orig == &other) continue;
    const TemplateMesh& tpl = f.ds.templates[orig.identity_index];

    const MeshSequence dubbed = dub(f.latent, orig.meshes, other.wave, tpl);
    const int T = dubbed.num_frames;

    const std::vector<float> measured_lip = head(f.rig.measure_lip_opening(dubbed, tpl), T);
    corr_new.push_back(pearson_correlation(
        measured_lip, head(oracle_lip_trajectory(f.synth, other.wave), T)));
    corr_orig.push_back(
        pearson_correlation(measured_lip, head(orig.tracks.lip_opening, T)));

    const std::vector<float> measured_blink = head(f.rig.measure_blink_state(dubbed, tpl), T);
    corr_blink.push_back(
        pearson_correlation(measured_blink, head(orig.tracks.blink_state, T)));
  }
  const double med_new = median(corr_new);
  const double med_orig = median(corr_orig);
  const double med_blink = median(corr_blink);

  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "criterion 9: dubbed lip corr with new audio %.3f > with original %.3f; eyelid "
                "corr with original blinks %.3f (> 0.8)",
                med_new, med_orig, med_blink);
  report(buf, med_new > med_orig && med_blink > 0.8);
}

TEST_CASE("trained-model examples: silence, seed variation, blink retargeting") {
  auto& f = fixture();
  const auto eval_idx = f.eval_sequences(2);

  // Silent audio keeps the lips nearly closed (< 10% of the speech-driven mean).
  Waveform silence;
  silence.sample_rate = 16000;
  silence.samples.assign(32000, 0.0f);
  const TemplateMesh& tpl = f.ds.templates[f.ds.sequences[eval_idx[0]].identity_index];
  const MeshSequence quiet = animate(f.latent, f.prior, tpl, silence, 3);
  double quiet_mean = 0.0;
  for (float v : f.rig.measure_lip_opening(quiet, tpl)) quiet_mean += std::abs(v);
  quiet_mean /= quiet.num_frames;

  double speech_mean = 0.0;
  int n = 0;
  for (int i : eval_idx) {
    const LoadedSequence& s = f.ds.sequences[i];
    const MeshSequence out =
        animate(f.latent, f.prior, f.ds.templates[s.identity_index], s.wave, 100 + n);
    for (float v : f.rig.measure_lip_opening(out, f.ds.templates[s.identity_index]))
      speech_mean += std::abs(v);
    n += out.num_frames;
  }
  speech_mean /= n;
  CHECK(quiet_mean < 0.1 * speech_mean);

  // Different seeds: same lip trajectory (within tolerance), different codes.
  const LoadedSequence& s = f.ds.sequences[eval_idx[1]];
  const TemplateMesh& tpl2 = f.ds.templates[s.identity_index];
  const MeshSequence a1 = animate(f.latent, f.prior, tpl2, s.wave, 41);
  const MeshSequence a2 = animate(f.latent, f.prior, tpl2, s.wave, 42);
  const auto lip1 = f.rig.measure_lip_opening(a1, tpl2);
  const auto lip2 = f.rig.measure_lip_opening(a2, tpl2);
  CHECK(pearson_correlation(lip1, lip2) > 0.8);
  bool outputs_differ = a1.data != a2.data;
  CHECK(outputs_differ);

  // Retargeting carries the source blinks onto the target identity.
  std::vector<double> blink_corrs;
  for (int i : f.ds.sequence_indices("test")) {
    const LoadedSequence& src = f.ds.sequences[i];
    const auto& blink = src.tracks.blink_state;
    if (std::accumulate(blink.begin(), blink.end(), 0.0f) <= 2.0f) continue;
    const TemplateMesh& target = f.ds.templates[0];  // a training identity
    const MeshSequence out = retarget(f.latent, src.meshes, src.features, target);
    CHECK(out.num_vertices == target.vertex_count());
    blink_corrs.push_back(pearson_correlation(f.rig.measure_blink_state(out, target),
                                              src.tracks.blink_state));
    if (blink_corrs.size() >= 5) break;
  }
  REQUIRE(!blink_corrs.empty());
  CHECK(median(blink_corrs) > 0.8);
}
