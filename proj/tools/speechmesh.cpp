// speechmesh command line: dataset synthesis, feature extraction,
// training, the three applications (animate / retarget / dub), metrics
// and latent-space analysis.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "speechmesh/apps/pipelines.hpp"
#include "speechmesh/core/config.hpp"
#include "speechmesh/eval/metrics.hpp"
#include "speechmesh/geometry/mesh_io.hpp"
#include "speechmesh/prior/prior_train.hpp"
#include "speechmesh/synth/dataset.hpp"
#include "speechmesh/train/trainer.hpp"

namespace sm = speechmesh;

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOpts* opts) {
  cmd->add_option("--config", opts->config_path, "run configuration file (key = value lines)");
  cmd->add_option("--set", opts->overrides, "override a config key, e.g. --set latent.C=16")
      ->type_name("KEY=VALUE");
}

sm::RunConfig make_config(const CommonOpts& opts) {
  sm::RunConfig cfg;
  if (!opts.config_path.empty()) cfg.apply_file(opts.config_path);
  for (const std::string& kv : opts.overrides) {
    const size_t eq = kv.find('=');
    sm::check(eq != std::string::npos, "--set expects KEY=VALUE, got \"" + kv + "\"");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

// Lip mask for eval: from an explicit template, or the default rig
// layout when the vertex count matches it.
sm::VertexMask lip_mask_for(const std::string& template_path, int V) {
  std::vector<sm::RegionLabel> labels;
  if (!template_path.empty()) {
    labels = sm::load_template_mesh(template_path).labels;
  } else {
    const sm::FaceRig rig;
    sm::check(rig.vertex_count() == V,
              "eval: V=" + std::to_string(V) +
                  " does not match the default face layout; pass --template");
    labels = rig.labels();
  }
  sm::check(static_cast<int>(labels.size()) == V, "eval: template V does not match sequences");
  return sm::build_masks(labels, 1.0f, 0.1f).lip;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"speechmesh: audio-driven face mesh animation toolkit"};
  app.require_subcommand(1);

  // ---- synth-data ----
  CommonOpts synth_opts;
  std::string synth_out = "data";
  uint64_t synth_seed = 0;
  bool synth_no_features = false;
  auto* synth = app.add_subcommand("synth-data", "generate the synthetic dataset");
  add_common(synth, &synth_opts);
  synth->add_option("--out", synth_out, "output dataset directory")->required();
  auto* synth_seed_opt = synth->add_option("--seed", synth_seed, "dataset seed");
  synth->add_flag("--no-features", synth_no_features, "skip writing .mels feature caches");

  // ---- featurize ----
  CommonOpts feat_opts;
  std::string feat_wav, feat_out, feat_data;
  auto* featurize = app.add_subcommand("featurize", "compute log-Mel features");
  add_common(featurize, &feat_opts);
  featurize->add_option("--wav", feat_wav, "input 16kHz mono WAV");
  featurize->add_option("--out", feat_out, "output .mels file");
  featurize->add_option("--data", feat_data, "dataset dir: write .mels next to each sequence");

  // ---- train-latent ----
  CommonOpts tl_opts;
  std::string tl_data, tl_out, tl_log, tl_mode, tl_latent;
  int tl_steps = -1;
  auto* train_latent = app.add_subcommand("train-latent", "train the latent face model");
  add_common(train_latent, &tl_opts);
  train_latent->add_option("--data", tl_data, "dataset directory")->required();
  train_latent->add_option("--out", tl_out, "output checkpoint")->required();
  train_latent->add_option("--mode", tl_mode,
                           "expr_only_l2 | expr_audio_l2 | expr_audio_xmod");
  train_latent->add_option("--latent", tl_latent, "categorical | continuous");
  train_latent->add_option("--steps", tl_steps, "override train.steps");
  train_latent->add_option("--log", tl_log, "loss curve log file");

  // ---- train-prior ----
  CommonOpts tp_opts;
  std::string tp_data, tp_encoder, tp_out, tp_log, tp_codes;
  int tp_steps = -1;
  auto* train_prior_cmd = app.add_subcommand("train-prior", "train the autoregressive prior");
  add_common(train_prior_cmd, &tp_opts);
  train_prior_cmd->add_option("--data", tp_data, "dataset directory")->required();
  train_prior_cmd->add_option("--encoder", tp_encoder, "trained latent checkpoint")->required();
  train_prior_cmd->add_option("--out", tp_out, "output checkpoint")->required();
  train_prior_cmd->add_option("--steps", tp_steps, "override prior.steps");
  train_prior_cmd->add_option("--log", tp_log, "loss curve log file");
  train_prior_cmd->add_option("--dump-codes", tp_codes,
                              "directory for the encoded-dataset cache (.latc)");

  // ---- animate ----
  CommonOpts an_opts;
  std::string an_template, an_audio, an_latent, an_prior, an_out, an_obj;
  uint64_t an_seed = 0;
  double an_temp = -1.0;
  auto* animate_cmd = app.add_subcommand("animate", "drive a template mesh from audio");
  add_common(animate_cmd, &an_opts);
  animate_cmd->add_option("--template", an_template, "template .msht")->required();
  animate_cmd->add_option("--audio", an_audio, "driving WAV")->required();
  animate_cmd->add_option("--latent", an_latent, "latent checkpoint")->required();
  animate_cmd->add_option("--prior", an_prior, "prior checkpoint")->required();
  animate_cmd->add_option("--seed", an_seed, "sampling seed");
  animate_cmd->add_option("--temperature", an_temp, "sampling temperature");
  animate_cmd->add_option("--out", an_out, "output .mshs")->required();
  animate_cmd->add_option("--obj", an_obj, "also export per-frame OBJ files with this prefix");

  // ---- retarget ----
  CommonOpts rt_opts;
  std::string rt_src, rt_src_audio, rt_target, rt_latent, rt_out;
  auto* retarget_cmd = app.add_subcommand("retarget", "transfer a performance to another identity");
  add_common(retarget_cmd, &rt_opts);
  retarget_cmd->add_option("--src", rt_src, "source performance .mshs")->required();
  retarget_cmd->add_option("--src-audio", rt_src_audio, "source WAV")->required();
  retarget_cmd->add_option("--target", rt_target, "target template .msht")->required();
  retarget_cmd->add_option("--latent", rt_latent, "latent checkpoint")->required();
  retarget_cmd->add_option("--out", rt_out, "output .mshs")->required();

  // ---- dub ----
  CommonOpts dub_opts;
  std::string dub_orig, dub_audio, dub_template, dub_latent, dub_out;
  auto* dub_cmd = app.add_subcommand("dub", "re-synthesize lip motion for new audio");
  add_common(dub_cmd, &dub_opts);
  dub_cmd->add_option("--original", dub_orig, "original performance .mshs")->required();
  dub_cmd->add_option("--audio", dub_audio, "new WAV")->required();
  dub_cmd->add_option("--template", dub_template, "template .msht")->required();
  dub_cmd->add_option("--latent", dub_latent, "latent checkpoint")->required();
  dub_cmd->add_option("--out", dub_out, "output .mshs")->required();

  // ---- eval ----
  CommonOpts ev_opts;
  std::string ev_pred, ev_gt, ev_template, ev_report;
  auto* eval_cmd = app.add_subcommand("eval", "lip / vertex error between two sequences");
  add_common(eval_cmd, &ev_opts);
  eval_cmd->add_option("--pred", ev_pred, "predicted .mshs")->required();
  eval_cmd->add_option("--gt", ev_gt, "ground-truth .mshs")->required();
  eval_cmd->add_option("--template", ev_template, "template .msht (region labels)");
  eval_cmd->add_option("--report", ev_report, "write a key-value metric report");

  // ---- analyze-latent ----
  CommonOpts al_opts;
  std::string al_data, al_latent, al_out;
  int al_samples = 40;
  auto* analyze_cmd = app.add_subcommand("analyze-latent",
                                         "cluster separation and modality influence maps");
  add_common(analyze_cmd, &al_opts);
  analyze_cmd->add_option("--data", al_data, "dataset directory")->required();
  analyze_cmd->add_option("--latent", al_latent, "latent checkpoint")->required();
  analyze_cmd->add_option("--out", al_out, "output directory")->required();
  analyze_cmd->add_option("--samples", al_samples, "codes per cluster set");

  // ---- dump-config ----
  CommonOpts dc_opts;
  auto* dump_cmd = app.add_subcommand("dump-config", "print the full configuration");
  add_common(dump_cmd, &dc_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) {
      sm::RunConfig cfg = make_config(synth_opts);
      cfg.synth.seed = synth_seed_opt->count() > 0 ? synth_seed : cfg.seed;
      sm::generate_dataset(cfg.synth, synth_out, !synth_no_features);
      std::cout << "dataset written to " << synth_out << "\n";
    } else if (featurize->parsed()) {
      sm::RunConfig cfg = make_config(feat_opts);
      if (!feat_data.empty()) {
        const auto entries = sm::read_manifest(feat_data);
        for (const auto& e : entries) {
          for (const auto& stem : e.sequence_stems) {
            const sm::Waveform wave = sm::load_wav(e.dir + "/" + stem + ".wav");
            const sm::MeshSequence seq = sm::load_mesh_sequence(e.dir + "/" + stem + ".mshs");
            sm::save_audio_features(e.dir + "/" + stem + ".mels",
                                    sm::mel_spectrogram(wave, seq.num_frames, cfg.synth.fps));
          }
        }
        std::cout << "features written under " << feat_data << "\n";
      } else {
        sm::check(!feat_wav.empty() && !feat_out.empty(),
                  "featurize: need --wav and --out (or --data)");
        const sm::Waveform wave = sm::load_wav(feat_wav);
        const int T = sm::num_visual_frames(wave, cfg.synth.fps);
        sm::save_audio_features(feat_out, sm::mel_spectrogram(wave, T, cfg.synth.fps));
        std::cout << feat_out << ": " << T << " visual frames\n";
      }
    } else if (train_latent->parsed()) {
      sm::RunConfig cfg = make_config(tl_opts);
      if (!tl_mode.empty()) cfg.train_mode = tl_mode;
      if (!tl_latent.empty()) cfg.latent.latent = sm::latent_kind_from_name(tl_latent);
      if (tl_steps >= 0) cfg.train_steps = tl_steps;
      sm::TrainConfig tc = cfg.train_config();
      tc.log_path = tl_log;
      const sm::LoadedDataset ds = sm::load_dataset(tl_data);
      sm::TrainResult result = sm::train_latent_model(tc, ds);
      sm::Checkpoint ckpt = result.model.to_checkpoint();
      ckpt.set("train.mode", sm::train_mode_name(tc.mode));
      ckpt.set_int("train.seed", static_cast<int64_t>(tc.seed));
      ckpt.set_int("train.steps", tc.steps);
      sm::save_checkpoint(tl_out, ckpt);
      std::cout << "final loss " << result.final_loss << ", checkpoint " << tl_out << "\n";
    } else if (train_prior_cmd->parsed()) {
      sm::RunConfig cfg = make_config(tp_opts);
      if (tp_steps >= 0) cfg.prior_steps = tp_steps;
      sm::LatentModelF latent = sm::LatentModelF::from_checkpoint(sm::load_checkpoint(tp_encoder));
      const sm::LoadedDataset ds = sm::load_dataset(tp_data);
      const auto encoded = sm::encode_dataset(latent, ds, "train");
      if (!tp_codes.empty() && latent.hyper().latent == sm::LatentKind::kCategorical) {
        std::filesystem::create_directories(tp_codes);
        for (size_t i = 0; i < encoded.size(); ++i) {
          char name[32];
          std::snprintf(name, sizeof(name), "/train_%04zu.latc", i);
          sm::save_latent_code(tp_codes + name,
                               sm::LatentCode::from_labels(encoded[i].labels, latent.hyper().C));
        }
      }
      sm::PriorTrainConfig pc = cfg.prior_config();
      pc.hyper.C = latent.hyper().C;
      pc.hyper.H = latent.hyper().H;
      pc.hyper.latent = latent.hyper().latent;
      pc.hyper.cont_dim = latent.hyper().cont_dim;
      pc.log_path = tp_log;
      sm::Checkpoint ckpt;
      double final_loss = 0.0;
      if (latent.hyper().latent == sm::LatentKind::kCategorical) {
        sm::PriorTrainResult result = sm::train_prior(pc, encoded);
        ckpt = result.model.to_checkpoint();
        final_loss = result.final_loss;
      } else {
        sm::ContinuousPriorTrainResult result = sm::train_prior_continuous(pc, encoded);
        ckpt = result.model.to_checkpoint();
        final_loss = result.final_loss;
      }
      ckpt.set_int("train.seed", static_cast<int64_t>(pc.seed));
      ckpt.set_int("train.steps", pc.steps);
      sm::save_checkpoint(tp_out, ckpt);
      std::cout << "final loss " << final_loss << ", checkpoint " << tp_out << "\n";
    } else if (animate_cmd->parsed()) {
      sm::RunConfig cfg = make_config(an_opts);
      const double temp = an_temp > 0 ? an_temp : cfg.sample_temperature;
      sm::LatentModelF latent = sm::LatentModelF::from_checkpoint(sm::load_checkpoint(an_latent));
      const sm::TemplateMesh tpl = sm::load_template_mesh(an_template);
      const sm::Waveform wave = sm::load_wav(an_audio);
      sm::MeshSequence out;
      if (latent.hyper().latent == sm::LatentKind::kCategorical) {
        sm::PriorModelF prior = sm::PriorModelF::from_checkpoint(sm::load_checkpoint(an_prior));
        out = sm::animate(latent, prior, tpl, wave, an_seed, temp, cfg.synth.fps);
      } else {
        sm::ContinuousPriorF prior =
            sm::ContinuousPriorF::from_checkpoint(sm::load_checkpoint(an_prior));
        out = sm::animate_continuous(latent, prior, tpl, wave, an_seed, temp, cfg.synth.fps);
      }
      sm::save_mesh_sequence(an_out, out);
      if (!an_obj.empty()) sm::export_obj_frames(an_obj, out);
      std::cout << an_out << ": " << out.num_frames << " frames\n";
    } else if (retarget_cmd->parsed()) {
      make_config(rt_opts);
      sm::LatentModelF latent = sm::LatentModelF::from_checkpoint(sm::load_checkpoint(rt_latent));
      const sm::MeshSequence src = sm::load_mesh_sequence(rt_src);
      const sm::Waveform wave = sm::load_wav(rt_src_audio);
      const sm::TemplateMesh target = sm::load_template_mesh(rt_target);
      const sm::MeshSequence out = sm::retarget(latent, src, wave, target);
      sm::save_mesh_sequence(rt_out, out);
      std::cout << rt_out << ": " << out.num_frames << " frames\n";
    } else if (dub_cmd->parsed()) {
      make_config(dub_opts);
      sm::LatentModelF latent = sm::LatentModelF::from_checkpoint(sm::load_checkpoint(dub_latent));
      const sm::MeshSequence orig = sm::load_mesh_sequence(dub_orig);
      const sm::Waveform wave = sm::load_wav(dub_audio);
      const sm::TemplateMesh tpl = sm::load_template_mesh(dub_template);
      const sm::MeshSequence out = sm::dub(latent, orig, wave, tpl);
      sm::save_mesh_sequence(dub_out, out);
      std::cout << dub_out << ": " << out.num_frames << " frames\n";
    } else if (eval_cmd->parsed()) {
      make_config(ev_opts);
      const sm::MeshSequence pred = sm::load_mesh_sequence(ev_pred);
      const sm::MeshSequence gt = sm::load_mesh_sequence(ev_gt);
      const sm::VertexMask lip = lip_mask_for(ev_template, pred.num_vertices);
      const double lip_mm = sm::lip_error(pred, gt, lip);
      const double vert_mm = sm::mean_vertex_error(pred, gt);
      std::printf("lip error %.3f mm\n", lip_mm);
      std::printf("vertex error %.3f mm\n", vert_mm);
      if (!ev_report.empty())
        sm::save_report(ev_report, {{"lip_error_mm", lip_mm}, {"vertex_error_mm", vert_mm}});
    } else if (analyze_cmd->parsed()) {
      sm::RunConfig cfg = make_config(al_opts);
      sm::LatentModelF latent = sm::LatentModelF::from_checkpoint(sm::load_checkpoint(al_latent));
      const sm::LoadedDataset ds = sm::load_dataset(al_data);
      std::filesystem::create_directories(al_out);
      const sm::ClusterAnalysis clusters =
          sm::latent_cluster_analysis(latent, ds, al_samples, cfg.seed);
      const sm::InfluenceMaps maps = sm::modality_influence_map(latent, ds);
      sm::save_vertex_map(al_out + "/audio_influence.vmap", maps.audio_influence);
      sm::save_vertex_map(al_out + "/expr_influence.vmap", maps.expr_influence);
      {
        std::string body = "# x y tag (0=varied-audio, 1=varied-expression)\n";
        char line[96];
        for (size_t i = 0; i < clusters.projections.size(); ++i) {
          std::snprintf(line, sizeof(line), "%.6f %.6f %d\n", clusters.projections[i][0],
                        clusters.projections[i][1], clusters.tags[i]);
          body += line;
        }
        sm::write_file_bytes(al_out + "/latent_clusters.txt",
                             std::vector<char>(body.begin(), body.end()));
      }
      sm::save_report(al_out + "/report.txt", {{"cluster_accuracy", clusters.accuracy}});
      std::printf("cluster accuracy %.3f\n", clusters.accuracy);
    } else if (dump_cmd->parsed()) {
      make_config(dc_opts).dump(std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
