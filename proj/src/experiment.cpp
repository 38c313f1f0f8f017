#include "pvg4d/experiment.hpp"

#include "pvg4d/io.hpp"

#include <fmt/format.h>

#include <random>
#include <stdexcept>

namespace pvg4d {

Experiment prepare_experiment(const ExperimentConfig& cfg, const std::string& scene_name) {
  const BenchmarkScene b = benchmark_scene(scene_name);
  Experiment ex;
  ex.scene_name = scene_name;
  ex.scene = make_scene(b.spec);
  ex.capture = cfg.capture_dir.empty() ? make_capture(ex.scene, b.path, b.n_frames, cfg.holdout_fraction)
                                       : load_capture(cfg.capture_dir);
  std::mt19937_64 rng(cfg.seed);
  ex.init = lidar_init(ex.scene, ex.capture, cfg.init, rng);
  ex.oracle = std::make_shared<const Oracle>(ex.scene, ex.capture.intrinsics, cfg.oracle);
  return ex;
}

std::optional<Localization> pooled_localization(const Experiment& ex, const ArmResult& arm) {
  if (arm.umaps.empty()) return std::nullopt;
  Localization pooled;
  double mover_sum = 0.0, bg_sum = 0.0;
  for (const PseudoFrame& p : arm.pseudo) {
    if (!p.meta || p.bracket_start < 0 || p.bracket_start >= static_cast<int>(arm.umaps.size())) continue;
    const Localization l = uncertainty_localization(ex.scene, ex.capture, ex.capture.pair(p.bracket_start), p,
                                                    arm.umaps[p.bracket_start]);
    mover_sum += l.corrupted_mover_beta * static_cast<double>(l.corrupted_mover_pixels);
    bg_sum += l.background_beta * static_cast<double>(l.background_pixels);
    pooled.corrupted_mover_pixels += l.corrupted_mover_pixels;
    pooled.background_pixels += l.background_pixels;
  }
  if (pooled.corrupted_mover_pixels == 0 || pooled.background_pixels == 0) return std::nullopt;
  pooled.corrupted_mover_beta = mover_sum / static_cast<double>(pooled.corrupted_mover_pixels);
  pooled.background_beta = bg_sum / static_cast<double>(pooled.background_pixels);
  return pooled;
}

SceneReport run_scene(const Experiment& ex, const ExperimentConfig& cfg, const std::vector<Arm>& arms) {
  SceneReport rep;
  rep.scene = ex.scene_name;
  rep.arms = ablate(ex.capture, *ex.oracle, cfg.train_config(Arm::Baseline), ex.init, arms);
  for (const ArmResult& a : rep.arms) {
    rep.object_errors.push_back(object_mid_errors(ex.scene, ex.capture, a.model, ex.scene_name));
    if (!rep.localization) rep.localization = pooled_localization(ex, a);
  }
  return rep;
}

std::vector<double> mean_psnr(const std::vector<SceneReport>& reports) {
  if (reports.empty()) return {};
  std::vector<double> m(reports.front().arms.size(), 0.0);
  for (const SceneReport& r : reports) {
    if (r.arms.size() != m.size()) throw std::invalid_argument("reports have different arm lists");
    for (size_t a = 0; a < m.size(); ++a) m[a] += r.arms[a].score.psnr;
  }
  for (double& v : m) v /= static_cast<double>(reports.size());
  return m;
}

std::string ablation_table(const std::vector<SceneReport>& reports) {
  if (reports.empty()) return "";
  std::string out = fmt::format("{:<10}", "arm");
  for (const SceneReport& r : reports) out += fmt::format(" {:>14}", r.scene);
  out += fmt::format(" {:>8} {:>8} {:>10}\n", "PSNR", "SSIM", "GM-SSIM");
  for (size_t a = 0; a < reports.front().arms.size(); ++a) {
    out += fmt::format("{:<10}", arm_name(reports.front().arms[a].arm));
    double ssim = 0.0, gm = 0.0;
    for (const SceneReport& r : reports) {
      out += fmt::format(" {:>14.2f}", r.arms[a].score.psnr);
      ssim += r.arms[a].score.ssim;
      gm += r.arms[a].score.gm_ssim;
    }
    const double n = static_cast<double>(reports.size());
    out += fmt::format(" {:>8.2f} {:>8.4f} {:>10.4f}\n", mean_psnr(reports)[a], ssim / n, gm / n);
  }
  return out;
}

std::string ablation_csv(const std::vector<SceneReport>& reports) {
  std::string out = "scene,arm,psnr,ssim,gm_ssim,mean_fraction,mean_beta\n";
  for (const SceneReport& r : reports)
    for (const ArmResult& a : r.arms) {
      double frac = 0.0, beta = 0.0;
      for (double f : a.fractions) frac += f;
      for (const UncertaintyMap& m : a.umaps) beta += m.mean_beta();
      out += fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g},", r.scene, arm_name(a.arm), a.score.psnr,
                         a.score.ssim, a.score.gm_ssim, a.fractions.empty() ? 0.0 : frac / a.fractions.size());
      out += a.umaps.empty() ? "\n" : fmt::format("{:.17g}\n", beta / a.umaps.size());
    }
  return out;
}

std::string flow_error_csv(const std::vector<SceneReport>& reports) {
  std::string out = "scene,arm,object,flow_px,mid_error\n";
  for (const SceneReport& r : reports)
    for (size_t a = 0; a < r.arms.size(); ++a)
      for (const ObjectError& e : r.object_errors[a])
        out += fmt::format("{},{},{},{:.17g},{:.17g}\n", r.scene, arm_name(r.arms[a].arm), e.object, e.flow_px,
                           e.mid_error);
  return out;
}

}  // namespace pvg4d
