#pragma once

#include <CLI11.hpp>
#include <cstdio>
#include <string>
#include <vector>

#include "strnet/config.hpp"
#include "strnet/trainer.hpp"

namespace strnet {

namespace cli_detail {

inline RunConfig load_or_default(const std::string& config_path, bool seed_set,
                                 std::uint64_t seed) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
  if (seed_set) cfg.seed = seed;
  cfg.validate();
  return cfg;
}

inline StrModel build_model(const RunConfig& cfg, const Dataset& ds) {
  if (ds.seq_len != cfg.seq_len || ds.channels != cfg.channels)
    throw ValueError("dataset windows are [" + std::to_string(ds.seq_len) + "x" +
                     std::to_string(ds.channels) + "] but the config wants [" +
                     std::to_string(cfg.seq_len) + "x" + std::to_string(cfg.channels) + "]");
  if (ds.joints != cfg.joints || ds.vertices != cfg.vertices)
    throw ValueError("dataset body (J=" + std::to_string(ds.joints) + ", Nv=" +
                     std::to_string(ds.vertices) + ") does not match the config");
  return StrModel(cfg.model_config(), ds.asset(), cfg.seed);
}

inline int cmd_synth(const RunConfig& cfg, const std::string& out) {
  Dataset ds = gen_synthetic_dataset(cfg.synthetic_config(), cfg.seed);
  ds.save(out);
  std::printf("synth: sequences=%zu windows=%zu dropout_frames=%zu -> %s\n", ds.gen_sequences,
              ds.windows.size(), ds.gen_dropout_frames, out.c_str());
  return 0;
}

inline int cmd_train(const RunConfig& cfg, const std::string& dataset_path,
                     const std::string& out, const std::string& resume_path,
                     const std::string& log_path, const std::string& val_path) {
  Dataset ds = Dataset::load(dataset_path);
  StrModel model = build_model(cfg, ds);

  TrainState state;
  std::vector<EpochLog> all_logs;
  if (!resume_path.empty()) state = load_checkpoint(resume_path, model);

  Dataset val;
  const Dataset* val_ptr = nullptr;
  std::string val_src = !val_path.empty() ? val_path : cfg.val_data_path;
  if (!val_src.empty()) {
    val = Dataset::load(val_src);
    val_ptr = &val;
  }

  TrainResult res = train(model, ds, val_ptr, cfg.train_options(), state);
  save_checkpoint(out, model, res.state);
  std::string log_file = log_path.empty() ? out + ".log.csv" : log_path;
  ArrayContainer::atomic_write_text(log_file, train_log_csv(res.epochs));

  if (!res.epochs.empty()) {
    const EpochLog& last = res.epochs.back();
    std::printf("train: epochs=%zu final_loss=%.6g lr=%.3g val_pa_mpjpe=%.6g -> %s\n",
                res.state.epoch, last.loss, last.lr, last.val.pa_mpjpe, out.c_str());
  } else {
    std::printf("train: epochs=%zu (no training steps) -> %s\n", res.state.epoch, out.c_str());
  }
  return 0;
}

inline int cmd_eval(const RunConfig& cfg, const std::string& checkpoint_path,
                    const std::string& dataset_path, const std::string& out) {
  Dataset ds = Dataset::load(dataset_path);
  StrModel model = build_model(cfg, ds);
  load_checkpoint(checkpoint_path, model);
  MetricsReport r = evaluate(model, ds, cfg.eval_gt_oracle, cfg.threads);
  std::string csv = r.csv();
  if (!out.empty()) ArrayContainer::atomic_write_text(out, csv);
  std::fputs(csv.c_str(), stdout);
  return 0;
}

inline int cmd_ablate(const RunConfig& cfg, const std::string& dataset_path,
                      const std::string& out, const std::string& variant,
                      const std::string& val_path) {
  Dataset ds = Dataset::load(dataset_path);
  Dataset heldout;
  std::string val_src = !val_path.empty() ? val_path : cfg.val_data_path;
  if (!val_src.empty())
    heldout = Dataset::load(val_src);
  else
    heldout = ds;  // degenerate fallback; a held-out set is the intended use

  std::vector<std::string> variants;
  if (!variant.empty())
    variants.push_back(variant);
  else
    variants = AblationFlags::variant_names();

  std::vector<AblationRow> rows =
      run_ablation(cfg.model_config(), ds, heldout, cfg.train_options(), cfg.seed, variants);
  std::string csv = ablation_csv(rows);
  if (!out.empty()) ArrayContainer::atomic_write_text(out, csv);
  std::fputs(csv.c_str(), stdout);
  return 0;
}

inline int cmd_plot(const RunConfig& cfg, const std::string& checkpoint_path,
                    const std::string& dataset_path, const std::string& out) {
  Dataset ds = Dataset::load(dataset_path);
  StrModel model = build_model(cfg, ds);
  load_checkpoint(checkpoint_path, model);

  auto tracks = collect_tracks(model, ds, cfg.eval_gt_oracle, cfg.threads);

  // longest uniformly spaced run across all sequences
  const SequenceTrack* best_track = nullptr;
  std::size_t best_begin = 0, best_len = 0;
  for (const auto& tr : tracks) {
    std::size_t begin = 0;
    for (std::size_t i = 1; i <= tr.frames.size(); ++i) {
      bool brk = i == tr.frames.size() ||
                 (i >= 2 && tr.frames[i] - tr.frames[i - 1] !=
                                tr.frames[begin + 1] - tr.frames[begin]);
      if (brk) {
        if (i - begin > best_len) {
          best_len = i - begin;
          best_begin = begin;
          best_track = &tr;
        }
        begin = i;
      }
    }
  }
  if (!best_track || best_len < 3)
    throw ValueError("plot needs a sequence with at least 3 consecutive predicted frames");

  std::string csv = "frame,pred_accel_err,gt_accel_magnitude\n";
  char buf[160];
  const auto& pred = best_track->pred_joints;
  const auto& gt = best_track->gt_joints;
  const std::size_t joints = gt[best_begin].dim(0);
  for (std::size_t i = best_begin + 1; i + 1 < best_begin + best_len; ++i) {
    double err = 0.0, mag = 0.0;
    for (std::size_t j = 0; j < joints; ++j) {
      double e2 = 0.0, m2 = 0.0;
      for (int a = 0; a < 3; ++a) {
        double ap = pred[i + 1].at(j, a) - 2.0 * pred[i].at(j, a) + pred[i - 1].at(j, a);
        double ag = gt[i + 1].at(j, a) - 2.0 * gt[i].at(j, a) + gt[i - 1].at(j, a);
        e2 += (ap - ag) * (ap - ag);
        m2 += ag * ag;
      }
      err += std::sqrt(e2) / double(joints);
      mag += std::sqrt(m2) / double(joints);
    }
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", best_track->frames[i], err, mag);
    csv += buf;
  }
  if (!out.empty()) ArrayContainer::atomic_write_text(out, csv);
  std::fputs(csv.c_str(), stdout);
  return 0;
}

}  // namespace cli_detail

// Exit codes: 0 success, 1 validation error, 2 IO error, 3 numeric failure.
inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"strnet: spatio-temporal tendency reasoning for video human pose, desk scale"};
  app.require_subcommand(1);

  std::string config_path, out_path, dataset_path, checkpoint_path, variant, log_path, val_path;
  std::uint64_t seed = 0;
  bool seed_set = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run configuration file (key = value)");
    sub->add_option("--seed", seed, "seed override")->each([&](const std::string&) {
      seed_set = true;
    });
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(synth);
  synth->add_option("--out", out_path, "output dataset file")->required();

  CLI::App* train_cmd = app.add_subcommand("train", "train a model on a dataset");
  add_common(train_cmd);
  train_cmd->add_option("--dataset", dataset_path, "training dataset file")->required();
  train_cmd->add_option("--out", out_path, "output checkpoint file")->required();
  train_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint to resume from");
  train_cmd->add_option("--log", log_path, "training log CSV (default: <out>.log.csv)");
  train_cmd->add_option("--val-dataset", val_path, "validation dataset file");

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  add_common(eval_cmd);
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  eval_cmd->add_option("--dataset", dataset_path, "evaluation dataset file")->required();
  eval_cmd->add_option("--out", out_path, "metrics CSV output");

  CLI::App* ablate = app.add_subcommand("ablate", "train and score the ablation variants");
  add_common(ablate);
  ablate->add_option("--dataset", dataset_path, "training dataset file")->required();
  ablate->add_option("--out", out_path, "comparison CSV output");
  ablate->add_option("--variant", variant, "run a single variant");
  ablate->add_option("--val-dataset", val_path, "held-out dataset file");

  CLI::App* plot = app.add_subcommand("plot", "emit per-frame acceleration-error series");
  add_common(plot);
  plot->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  plot->add_option("--dataset", dataset_path, "dataset file")->required();
  plot->add_option("--out", out_path, "series CSV output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    RunConfig cfg = cli_detail::load_or_default(config_path, seed_set, seed);
    if (synth->parsed()) return cli_detail::cmd_synth(cfg, out_path);
    if (train_cmd->parsed())
      return cli_detail::cmd_train(cfg, dataset_path, out_path, checkpoint_path, log_path,
                                   val_path);
    if (eval_cmd->parsed()) return cli_detail::cmd_eval(cfg, checkpoint_path, dataset_path,
                                                        out_path);
    if (ablate->parsed()) return cli_detail::cmd_ablate(cfg, dataset_path, out_path, variant,
                                                        val_path);
    if (plot->parsed()) return cli_detail::cmd_plot(cfg, checkpoint_path, dataset_path,
                                                    out_path);
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 3;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

}  // namespace strnet
