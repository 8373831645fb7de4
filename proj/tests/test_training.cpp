#include <catch2/catch_amalgamated.hpp>
#include <filesystem>

#include "speechmesh/train/trainer.hpp"

using namespace speechmesh;

namespace {

// Small dataset shared across the training tests (real generator, small
// face and short sequences to keep runtimes down).
struct Fixture {
  std::filesystem::path root;
  LoadedDataset ds;

  Fixture() {
    SynthConfig cfg;
    cfg.counts = RegionCounts{4, 6, 12, 4, 4};  // V = 30
    cfg.train_identities = 2;
    cfg.test_identities = 1;
    cfg.sequences_per_identity = 2;
    cfg.frames_per_sequence = 16;
    cfg.seed = 5;
    root = std::filesystem::temp_directory_path() / "sm_train_test";
    std::filesystem::remove_all(root);
    generate_dataset(cfg, root.string());
    ds = load_dataset(root.string());
  }
  ~Fixture() { std::filesystem::remove_all(root); }
};

const Fixture& fixture() {
  static Fixture f;
  return f;
}

LatentHyper small_hyper() {
  LatentHyper hp;
  hp.C = 6;
  hp.H = 3;
  hp.tick_proj = 4;
  hp.tick_pool = 10;  // 60 ticks -> 6 bins
  hp.d_audio = 10;
  hp.d_expr = 10;
  hp.d_fuse = 10;
  hp.code_embed = 3;
  hp.dec_w1 = 12;
  hp.dec_w2 = 10;
  hp.dec_w3 = 8;
  hp.dec_lstm = 10;
  return hp;
}

TrainConfig small_config(TrainMode mode, uint64_t seed) {
  TrainConfig cfg;
  cfg.mode = mode;
  cfg.hyper = small_hyper();
  cfg.steps = 10;
  cfg.batch = 2;
  cfg.crop_frames = 8;
  cfg.lr = 2e-3;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("training smoke: loss decreases for most seeds") {
  int improved = 0;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    TrainConfig cfg = small_config(TrainMode::kExprAudioXmod, seed);
    const TrainResult r = train_latent_model(cfg, fixture().ds);
    REQUIRE(r.loss_curve.size() == 10);
    const double first = (r.loss_curve[0] + r.loss_curve[1]) / 2;
    const double last = (r.loss_curve[8] + r.loss_curve[9]) / 2;
    if (last < first) ++improved;
  }
  CHECK(improved >= 8);
}

TEST_CASE("training is deterministic given the seed") {
  TrainConfig cfg = small_config(TrainMode::kExprAudioXmod, 3);
  TrainResult r1 = train_latent_model(cfg, fixture().ds);
  TrainResult r2 = train_latent_model(cfg, fixture().ds);
  auto p1 = r1.model.collect();
  auto p2 = r2.model.collect();
  REQUIRE(p1.size() == p2.size());
  for (size_t i = 0; i < p1.size(); ++i) {
    CAPTURE(p1[i].name);
    CHECK((*p1[i].value - *p2[i].value).cwiseAbs().maxCoeff() == 0.0f);
  }
}

TEST_CASE("expr-only mode drops the audio encoder") {
  TrainConfig cfg = small_config(TrainMode::kExprOnlyL2, 4);
  TrainResult r = train_latent_model(cfg, fixture().ds);
  CHECK_FALSE(r.model.hyper().use_audio);

  Checkpoint ckpt = r.model.to_checkpoint();
  CHECK(ckpt.get_int("latent.use_audio") == 0);
  for (const auto& blob : ckpt.blobs) CHECK(blob.name.find("encoder.audio") == std::string::npos);

  // Reload and reconstruct without audio features.
  LatentModelF loaded = LatentModelF::from_checkpoint(ckpt);
  const LoadedSequence& s = fixture().ds.sequences[0];
  const MeshSequence recon =
      loaded.reconstruct(fixture().ds.templates[s.identity_index], s.meshes, nullptr);
  CHECK(recon.num_frames == s.meshes.num_frames);
  CHECK_THROWS_AS(loaded.encode_logits(s.meshes, &s.features), contract_error);
}

TEST_CASE("plain-l2 and continuous variants run and stay finite") {
  {
    TrainConfig cfg = small_config(TrainMode::kExprAudioL2, 5);
    TrainResult r = train_latent_model(cfg, fixture().ds);
    CHECK(std::isfinite(r.final_loss));
  }
  {
    TrainConfig cfg = small_config(TrainMode::kExprAudioXmod, 6);
    cfg.hyper.latent = LatentKind::kContinuous;
    cfg.hyper.cont_dim = 4;
    TrainResult r = train_latent_model(cfg, fixture().ds);
    CHECK(std::isfinite(r.final_loss));
    CHECK(r.model.hyper().latent == LatentKind::kContinuous);
    // Posterior-mean reconstruction path works.
    const LoadedSequence& s = fixture().ds.sequences[0];
    const MeshSequence recon =
        r.model.reconstruct(fixture().ds.templates[s.identity_index], s.meshes, &s.features);
    recon.validate();
  }
}

TEST_CASE("training writes a per-step loss log") {
  const auto log_path = std::filesystem::temp_directory_path() / "sm_losslog.txt";
  TrainConfig cfg = small_config(TrainMode::kExprAudioXmod, 7);
  cfg.log_path = log_path.string();
  train_latent_model(cfg, fixture().ds);
  std::ifstream in(log_path);
  REQUIRE(in.good());
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    if (lines == 0) {
      CHECK(line.find("step 0 ") == 0);
      CHECK(line.find("xmod") != std::string::npos);
      CHECK(line.find("eyelid") != std::string::npos);
    }
    ++lines;
  }
  CHECK(lines == cfg.steps);
  std::filesystem::remove(log_path);
}

TEST_CASE("reconstruction_error: runs on a split and is non-negative") {
  TrainConfig cfg = small_config(TrainMode::kExprAudioXmod, 8);
  TrainResult r = train_latent_model(cfg, fixture().ds);
  const double err_train = reconstruction_error(r.model, fixture().ds, "train");
  const double err_test = reconstruction_error(r.model, fixture().ds, "test");
  CHECK(err_train >= 0.0);
  CHECK(err_test >= 0.0);
  CHECK(std::isfinite(err_train));
  CHECK_THROWS_AS(reconstruction_error(r.model, fixture().ds, "val"), contract_error);
}
