#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "speechmesh/model/encoder.hpp"
#include "speechmesh/model/latent_model.hpp"
#include "speechmesh/nn/gumbel.hpp"

using namespace speechmesh;
using Mat = nn::MatX<float>;

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

Mat random_mat(int r, int c, uint64_t seed, float scale = 1.0f) {
  Rng rng(seed);
  Mat m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = scale * static_cast<float>(rng.normal());
  return m;
}

AudioFeatures random_features(int T, int ticks, int bands, uint64_t seed) {
  AudioFeatures f;
  f.num_frames = T;
  f.ticks = ticks;
  f.bands = bands;
  f.data.resize(static_cast<size_t>(T) * ticks * bands);
  Rng rng(seed);
  for (auto& v : f.data) v = static_cast<float>(rng.normal());
  return f;
}

}  // namespace

TEST_CASE("audio encoder: shape, determinism, receptive field") {
  const LatentHyper hp = tiny_hyper();
  Rng rng(1);
  typename AudioEncoder<float>::Arch arch{hp.mel_bands, hp.mel_ticks, hp.tick_proj, hp.tick_pool,
                                          hp.audio_layers, hp.audio_kernel, hp.d_audio, hp.act()};
  AudioEncoder<float> enc(arch, rng);
  const int T = 20;
  const Mat ticks = random_mat(hp.mel_bands, hp.mel_ticks * T, 2);
  const Mat y0 = enc.forward(ticks, T, 1);
  CHECK(y0.rows() == hp.d_audio);
  CHECK(y0.cols() == T);
  const Mat y1 = enc.forward(ticks, T, 1);
  CHECK((y0 - y1).cwiseAbs().maxCoeff() == 0.0f);

  // Causal stack: perturbing visual frame tau changes only frames
  // [tau, tau + receptive_frames].
  const int rf = enc.receptive_frames();
  CHECK(rf == 8);  // four causal kernel-3 layers
  const int tau = 6;
  Mat ticks2 = ticks;
  ticks2.middleCols(tau * hp.mel_ticks, hp.mel_ticks).array() += 1.0f;
  const Mat y2 = enc.forward(ticks2, T, 1);
  for (int t = 0; t < T; ++t) {
    const float diff = (y2.col(t) - y0.col(t)).cwiseAbs().maxCoeff();
    if (t < tau || t > tau + rf)
      CHECK(diff == 0.0f);
    else if (t == tau)
      CHECK(diff > 0.0f);
  }
}

TEST_CASE("expression encoder: forward recurrence only") {
  const LatentHyper hp = tiny_hyper();
  Rng rng(3);
  ExpressionEncoder<float> enc(hp.V * 3, hp.d_expr, hp.act(), rng);
  const int T = 10;
  const Mat x = random_mat(hp.V * 3, T, 4);
  const Mat y0 = enc.forward(x, T, 1);
  CHECK(y0.rows() == hp.d_expr);
  CHECK(y0.cols() == T);

  Mat x2 = x;
  x2.col(6).array() += 0.5f;
  const Mat y1 = enc.forward(x2, T, 1);
  for (int t = 0; t < 6; ++t) CHECK((y1.col(t) - y0.col(t)).cwiseAbs().maxCoeff() == 0.0f);
  CHECK((y1.col(6) - y0.col(6)).cwiseAbs().maxCoeff() > 0.0f);

  // T=1 works; zero input accepted, finite output.
  const Mat z = Mat::Zero(hp.V * 3, 1);
  const Mat yz = enc.forward(z, 1, 1);
  CHECK(yz.cols() == 1);
  CHECK(yz.allFinite());
}

TEST_CASE("fusion: per-time-step application commutes with permutation") {
  const LatentHyper hp = tiny_hyper();
  LatentModel<float> model(hp, 7);
  const int T = 5;
  const Mat audio = random_mat(hp.d_audio, T, 8);
  const Mat expr = random_mat(hp.d_expr, T, 9);
  const Mat logits = model.encoder().fuse(&audio, expr);
  CHECK(logits.rows() == hp.H * hp.C);
  CHECK(logits.cols() == T);
  CHECK(logits.allFinite());

  const std::vector<int> perm = {3, 0, 4, 1, 2};
  Mat audio_p(hp.d_audio, T), expr_p(hp.d_expr, T);
  for (int t = 0; t < T; ++t) {
    audio_p.col(t) = audio.col(perm[t]);
    expr_p.col(t) = expr.col(perm[t]);
  }
  const Mat logits_p = model.encoder().fuse(&audio_p, expr_p);
  for (int t = 0; t < T; ++t)
    CHECK((logits_p.col(t) - logits.col(perm[t])).cwiseAbs().maxCoeff() == 0.0f);

  // Mismatched lengths are rejected.
  const Mat short_expr = random_mat(hp.d_expr, T - 1, 10);
  CHECK_THROWS_AS(model.encoder().fuse(&audio, short_expr), contract_error);
}

TEST_CASE("encode_logits end to end: shapes and V checks") {
  const LatentHyper hp = tiny_hyper();
  LatentModel<float> model(hp, 11);
  MeshSequence x = MeshSequence::zeros(7, hp.V);
  Rng rng(12);
  for (auto& v : x.data) v = static_cast<float>(rng.normal() * 5);
  const AudioFeatures a = random_features(7, hp.mel_ticks, hp.mel_bands, 13);
  const Eigen::MatrixXf logits = model.encode_logits(x, &a);
  CHECK(logits.rows() == hp.H * hp.C);
  CHECK(logits.cols() == 7);

  MeshSequence bad = MeshSequence::zeros(7, hp.V + 1);
  CHECK_THROWS_AS(model.encode_logits(bad, &a), contract_error);
  CHECK_THROWS_AS(model.encode_logits(x, nullptr), contract_error);
}

TEST_CASE("categorize: argmax picks the peak logit") {
  nn::GumbelHeads<double> gumbel(1, 4);
  nn::MatX<double> logits(4, 1);
  logits << 0.0, 5.0, 0.0, 0.0;
  const auto out = gumbel.forward(logits, 1.0, nn::CategorizeMode::kArgmax, nullptr);
  CHECK(gumbel.labels()(0, 0) == 1);
  CHECK(out(1, 0) == 1.0);
  CHECK(out.col(0).sum() == 1.0);
}

TEST_CASE("categorize: sample_hard at tau=0.01 matches argmax on separated logits") {
  nn::GumbelHeads<double> gumbel(1, 4);
  Rng rng(21);
  Rng noise(22);
  int match = 0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) {
    nn::MatX<double> logits(4, 1);
    // Random logits with a gap >= 2 between best and runner-up.
    for (int c = 0; c < 4; ++c) logits(c, 0) = rng.normal();
    Eigen::Index arg;
    logits.col(0).maxCoeff(&arg);
    logits(arg, 0) += 2.0;
    gumbel.forward(logits, 0.01, nn::CategorizeMode::kSampleHard, &noise);
    if (gumbel.labels()(0, 0) == static_cast<int>(arg)) ++match;
  }
  CHECK(match >= static_cast<int>(0.99 * trials));
}

TEST_CASE("categorize: uniform logits sample uniformly") {
  const int C = 8;
  nn::GumbelHeads<double> gumbel(1, C);
  const nn::MatX<double> logits = nn::MatX<double>::Zero(C, 1);
  Rng noise(33);
  std::vector<int> counts(C, 0);
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    gumbel.forward(logits, 1.0, nn::CategorizeMode::kSampleHard, &noise);
    counts[gumbel.labels()(0, 0)]++;
  }
  const double p = 1.0 / C;
  const double sigma = std::sqrt(n * p * (1 - p));
  for (int c = 0; c < C; ++c) CHECK(std::abs(counts[c] - n * p) < 3.0 * sigma);
}

TEST_CASE("categorize: soft rows sum to one, labels equal argmax(soft)") {
  nn::GumbelHeads<float> gumbel(3, 5);
  const Mat logits = random_mat(15, 6, 44, 2.0f);
  Rng noise(45);
  const Mat soft = gumbel.forward(logits, 0.7, nn::CategorizeMode::kSampleSoft, &noise);
  for (int n = 0; n < 6; ++n)
    for (int h = 0; h < 3; ++h) {
      auto block = soft.col(n).segment(h * 5, 5);
      CHECK(block.sum() == Catch::Approx(1.0).margin(1e-5));
      CHECK(block.minCoeff() >= 0.0f);
      Eigen::Index arg;
      block.maxCoeff(&arg);
      CHECK(static_cast<int>(arg) == gumbel.labels()(h, n));
    }

  // Rejections.
  Mat bad = logits;
  bad(0, 0) = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(gumbel.forward(bad, 1.0, nn::CategorizeMode::kArgmax, nullptr), contract_error);
  CHECK_THROWS_AS(gumbel.forward(logits, 0.0, nn::CategorizeMode::kSampleSoft, &noise),
                  contract_error);
}

TEST_CASE("latent code: validation and model-level categorize") {
  const LatentHyper hp = tiny_hyper();
  LatentModel<float> model(hp, 50);
  const Eigen::MatrixXf logits = random_mat(hp.H * hp.C, 5, 51, 3.0f);
  const LatentCode code = model.categorize(logits, 1.0, nn::CategorizeMode::kArgmax, nullptr);
  code.validate();
  CHECK(code.num_frames() == 5);
  CHECK(code.heads() == hp.H);
}
