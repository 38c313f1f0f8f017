#include "pvg4d/experiment.hpp"
#include "pvg4d/image_io.hpp"
#include "pvg4d/io.hpp"
#include "pvg4d/metrics.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace pvg4d;
namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::string config;
  std::optional<uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> iters;
  std::optional<std::string> schedule;
  std::optional<int> distill_period;
  std::optional<std::string> oracle_preset;
  std::optional<std::string> arms;
  std::optional<std::string> scene;

  void add_to(CLI::App* app, bool with_arms) {
    app->add_option("--config", config, "YAML experiment config")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "random seed");
    app->add_option("--out", out, "output directory");
    app->add_option("--iters", iters, "training iterations per run");
    app->add_option("--resolution-schedule", schedule, "downsample factors, e.g. 16,8,4,2");
    app->add_option("--distill-period", distill_period, "distill every N iterations");
    app->add_option("--oracle-preset", oracle_preset, "clean, biased or streetlike");
    app->add_option("--scene", scene, "fastmover-6, fastmover-6:N or panning");
    if (with_arms) app->add_option("--arms", arms, "comma list of baseline,+pseudo,+JTO,+JTO+UD");
  }

  ExperimentConfig apply(ExperimentConfig c) const {
    if (seed) c.seed = *seed;
    if (out) c.out = *out;
    if (iters) c.train.total_iters = *iters;
    if (schedule) c.resolution_factors = parse_int_list(*schedule);
    if (distill_period) c.train.distill_period = *distill_period;
    if (oracle_preset) {
      const uint64_t s = c.oracle.seed;
      c.oracle = pvg4d::oracle_preset(*oracle_preset);
      c.oracle.seed = s;
    }
    if (arms) c.arms = parse_arm_list(*arms);
    if (scene) c.scene = *scene;
    c.validate();
    return c;
  }

  ExperimentConfig load() const { return apply(config.empty() ? ExperimentConfig{} : load_config(config)); }
};

std::string dir_name(const std::string& scene) {
  std::string s = scene;
  for (char& ch : s)
    if (ch == ':') ch = '_';
  return s;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  f << text;
  if (!f) throw IoError(path.string() + ": cannot write");
}

std::string single_scene(const ExperimentConfig& cfg) {
  const std::vector<std::string> names = expand_scene(cfg.scene);
  if (names.size() != 1)
    throw std::invalid_argument("scene '" + cfg.scene + "' selects " + std::to_string(names.size()) +
                                " scenes; this command needs one (e.g. fastmover-6:1)");
  return names.front();
}

std::string score_line(const HoldoutScore& s) {
  return fmt::format("psnr {:.4f} ssim {:.6f} gm_ssim_proxy {:.6f}", s.psnr, s.ssim, s.gm_ssim);
}

void cmd_synth(const ExperimentConfig& cfg) {
  for (const std::string& name : expand_scene(cfg.scene)) {
    ExperimentConfig one = cfg;
    one.scene = name;
    one.capture_dir.clear();
    const Experiment ex = prepare_experiment(one, name);
    const fs::path dir = fs::path(cfg.out) / dir_name(name);
    save_capture(ex.capture, dir / "capture");
    TrainState gt;
    gt.model = ex.scene.model;
    save_checkpoint(Checkpoint{emit_config(one), name, "ground-truth", gt}, dir / "gt.ckpt");
    save_config(one, (dir / "config.yaml").string());
    std::cout << fmt::format("{}: {} frames, {} holdout, {} gaussians -> {}\n", name, ex.capture.frames.size(),
                             ex.capture.holdout.size(), ex.scene.model.gaussians.size(), dir.string());
  }
}

/// Keeps the header and the rows up to `iteration` of an existing log.
std::string truncated_log(const fs::path& path, int iteration) {
  std::ifstream f(path);
  if (!f) throw IoError(path.string() + ": cannot read the log of the resumed run");
  std::string line, out;
  int n = 0;
  while (std::getline(f, line)) {
    if (n++ > 0 && std::stoi(line.substr(0, line.find(','))) > iteration) break;
    out += line + "\n";
  }
  return out;
}

void cmd_train(ExperimentConfig cfg, const Overrides& ov, const std::string& resume, int checkpoint_every,
               int until) {
  std::optional<Checkpoint> ck;
  if (!resume.empty()) {
    ck = load_checkpoint(resume);
    cfg = ov.apply(parse_config(ck->config_yaml, resume));
  }
  const std::string name = single_scene(cfg);
  const Experiment ex = prepare_experiment(cfg, name);
  const fs::path out = cfg.out;
  fs::create_directories(out);
  save_config(cfg, (out / "config.yaml").string());

  const TrainConfig tc = cfg.train_config();
  Trainer trainer(ex.capture, ex.oracle.get(), tc, ck ? SceneModel{} : ex.init);
  std::string log_text = csv_header(ex.capture.frames.size() - 1) + "\n";
  if (ck) {
    trainer.restore(ck->state);
    log_text = truncated_log(out / "train_log.csv", ck->state.iteration);
  }
  std::ofstream log(out / "train_log.csv");
  log << log_text;
  trainer.on_log = [&](const LogRow& r) {
    log << csv_line(r) << "\n";
    if (r.psnr_holdout) std::cout << fmt::format("iter {:>5}  holdout psnr {:.3f}\n", r.iter, *r.psnr_holdout);
  };
  const auto save = [&] {
    log.flush();
    save_checkpoint(Checkpoint{emit_config(cfg), name, arm_name(cfg.arm), trainer.state()}, out / "checkpoint.ckpt");
  };
  const int stop = until > 0 ? std::min(until, tc.total_iters) : tc.total_iters;
  while (trainer.state().iteration < stop) {
    const int next = checkpoint_every > 0 ? std::min(stop, trainer.state().iteration + checkpoint_every) : stop;
    trainer.run(next);
    save();
  }
  save();
  if (stop < tc.total_iters) {
    std::cout << fmt::format("stopped at iteration {}; resume with --resume {}\n", stop,
                             (out / "checkpoint.ckpt").string());
    return;
  }
  for (const PseudoFrame& p : trainer.pseudo_frames())
    save_pseudo_frame(p, tc.factor_at(tc.total_iters), out / "pseudo" / fmt::format("bracket_{:02}", p.bracket_start));
  const HoldoutScore s = evaluate_holdout(trainer.state().model, ex.capture, tc.eval_factor);
  write_text(out / "eval.txt", score_line(s) + "\n");
  std::cout << fmt::format("{} {}: {}\n", name, arm_name(cfg.arm), score_line(s));
}

void cmd_eval(const std::string& checkpoint, const std::string& capture_dir, const fs::path& out) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  ExperimentConfig cfg = parse_config(ck.config_yaml, checkpoint);
  if (!capture_dir.empty()) cfg.capture_dir = capture_dir;
  const Capture capture = cfg.capture_dir.empty()
                              ? prepare_experiment(cfg, ck.scene).capture
                              : load_capture(cfg.capture_dir);
  const HoldoutScore s = evaluate_holdout(ck.state.model, capture, cfg.train.eval_factor);
  std::string text = score_line(s) + "\n";
  for (size_t i = 0; i < s.per_frame_psnr.size(); ++i)
    text += fmt::format("holdout {:>2} bracket {:>2} psnr {:.4f}\n", i, capture.holdout_bracket[i], s.per_frame_psnr[i]);
  std::cout << text;
  if (!out.empty()) write_text(out / "eval.txt", text);
}

std::vector<SceneReport> run_all(const ExperimentConfig& cfg) {
  std::vector<SceneReport> reports;
  for (const std::string& name : expand_scene(cfg.scene)) {
    const Experiment ex = prepare_experiment(cfg, name);
    reports.push_back(run_scene(ex, cfg, cfg.arms));
    std::cerr << fmt::format("{} done\n", name);
  }
  return reports;
}

void cmd_ablate(const ExperimentConfig& cfg) {
  const std::vector<SceneReport> reports = run_all(cfg);
  const fs::path out = cfg.out;
  const std::string table = ablation_table(reports);
  write_text(out / "ablation.txt", table);
  write_text(out / "ablation.csv", ablation_csv(reports));
  write_text(out / "flow_error.csv", flow_error_csv(reports));
  save_config(cfg, (out / "config.yaml").string());
  std::cout << table;
}

void cmd_analyze_flow(const ExperimentConfig& cfg) {
  const std::vector<SceneReport> reports = run_all(cfg);
  const fs::path out = cfg.out;
  write_text(out / "flow_error.csv", flow_error_csv(reports));
  std::vector<std::vector<std::pair<double, double>>> series(cfg.arms.size());
  std::string summary;
  for (size_t a = 0; a < cfg.arms.size(); ++a) {
    std::vector<ObjectError> rows;
    for (const SceneReport& r : reports) rows.insert(rows.end(), r.object_errors[a].begin(), r.object_errors[a].end());
    for (const ObjectError& e : rows) series[a].emplace_back(e.flow_px, e.mid_error);
    const FlowErrorSummary s = summarize_flow_error(rows);
    summary += fmt::format("{:<10} objects {:>3}  pearson_r {:.4f}  top_quartile_mean_error {:.6g}\n",
                           arm_name(cfg.arms[a]), rows.size(), s.pearson_r, s.top_quartile_error);
  }
  write_png(out / "flow_error.png", scatter_plot(series, 480, 360));
  write_text(out / "flow_error_summary.txt", summary);
  save_config(cfg, (out / "config.yaml").string());
  std::cout << summary;
}

void cmd_export_uncertainty(const std::string& checkpoint, const fs::path& out) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  if (ck.state.umaps.empty()) throw std::invalid_argument(checkpoint + ": run has no uncertainty maps (arm " + ck.arm + ")");
  for (size_t k = 0; k < ck.state.umaps.size(); ++k) {
    const UncertaintyMap& m = ck.state.umaps[k];
    export_uncertainty(m, out / fmt::format("umap_{:02}", k));
    std::cout << fmt::format("bracket {:>2} {}x{} mean beta {:.6g}\n", k, m.width(), m.height(), m.mean_beta());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"4D periodic-vibration Gaussian splatting with pseudo-frame distillation"};
  app.require_subcommand(1);
  Overrides ov;

  CLI::App* synth = app.add_subcommand("synth", "write benchmark captures and ground-truth checkpoints");
  ov.add_to(synth, false);

  CLI::App* train = app.add_subcommand("train", "train one arm on one scene");
  ov.add_to(train, false);
  std::string resume, arm;
  int checkpoint_every = 0, until = 0;
  train->add_option("--resume", resume, "checkpoint to resume from")->check(CLI::ExistingFile);
  train->add_option("--checkpoint-every", checkpoint_every, "write out/checkpoint.ckpt every N iterations");
  train->add_option("--until", until, "stop after this iteration (resume later)");
  train->add_option("--arm", arm, "baseline, +pseudo, +JTO or +JTO+UD");

  CLI::App* eval = app.add_subcommand("eval", "held-out PSNR / SSIM / GM-SSIM proxy of a checkpoint");
  std::string checkpoint, capture_dir, eval_out;
  eval->add_option("checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--capture", capture_dir, "capture directory (default: the checkpoint's scene)");
  eval->add_option("--out", eval_out, "also write eval.txt here");

  CLI::App* ablate_cmd = app.add_subcommand("ablate", "train every arm and tabulate held-out PSNR");
  ov.add_to(ablate_cmd, true);

  CLI::App* flow = app.add_subcommand("analyze-flow", "per-object flow magnitude vs mid-frame error");
  ov.add_to(flow, true);

  CLI::App* exportu = app.add_subcommand("export-uncertainty", "write uncertainty maps of a checkpoint");
  std::string export_ckpt, export_out;
  exportu->add_option("checkpoint", export_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  exportu->add_option("--out", export_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*synth) {
      cmd_synth(ov.load());
    } else if (*train) {
      ExperimentConfig cfg = ov.load();
      if (!arm.empty()) cfg.arm = parse_arm(arm);
      cmd_train(cfg, ov, resume, checkpoint_every, until);
    } else if (*eval) {
      cmd_eval(checkpoint, capture_dir, eval_out);
    } else if (*ablate_cmd) {
      cmd_ablate(ov.load());
    } else if (*flow) {
      Overrides o = ov;
      if (!o.arms) o.arms = "baseline,+JTO+UD";
      cmd_analyze_flow(o.load());
    } else if (*exportu) {
      cmd_export_uncertainty(export_ckpt, export_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "pvg4d: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
