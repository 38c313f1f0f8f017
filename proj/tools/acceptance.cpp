// Acceptance suite: one PASS/FAIL line per criterion. Exit code 1 if any fail.

#include "support/gradcheck.hpp"

#include "pvg4d/experiment.hpp"
#include "pvg4d/io.hpp"
#include "pvg4d/parallel.hpp"
#include "pvg4d/pose_interp.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>

using namespace pvg4d;
using namespace pvg4d::fdcheck;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// Central difference that refines the step while the stencil straddles a
/// forward discontinuity (alpha cutoff, depth-order swap), detected by a
/// second difference far above the smooth-curvature level.
double refined_difference(const std::function<double(double)>& f, double x, double h, int* refined) {
  const double f0 = f(x);
  for (int round = 0;; ++round) {
    const double fp = f(x + h), fm = f(x - h);
    if (std::abs(fp - 2.0 * f0 + fm) < 1e-6 || round == 3) return (fp - fm) / (2.0 * h);
    ++*refined;
    h *= 0.1;
  }
}

/// Worst |a - b| / (rtol * max(|a|, |b|) + atol); <= 1 means within tolerance.
struct Worst {
  double ratio = 0.0;
  std::string where;
  size_t checks = 0;

  void add(double analytic, double fd, double rtol, double atol, const std::string& label) {
    ++checks;
    const double r = std::abs(analytic - fd) / (rtol * std::max(std::abs(analytic), std::abs(fd)) + atol);
    if (r > ratio) {
      ratio = r;
      where = fmt::format("{} analytic {:.9g} fd {:.9g}", label, analytic, fd);
    }
  }
};

Verdict gradient_correctness() {
  const Clock clock;
  std::mt19937_64 rng(2024);
  Worst render_w, dt_w, beta_w;
  const double h = 1e-6;
  int refined = 0;
  const int scenes = 20;
  for (int trial = 0; trial < scenes; ++trial) {
    SceneModel scene;
    Camera cam;
    const int n = std::uniform_int_distribution<int>(10, 50)(rng);
    random_scene(rng, n, scene, cam, 64, 64);
    const double t = std::uniform_real_distribution<double>(0.2, 0.8)(rng);
    const Image w = random_image(64, 64, 3, rng);
    const GradientBuffer g = render_backward(scene, cam, t, w);
    for (size_t i = 0; i < scene.gaussians.size(); ++i)
      for (int k = 0; k < kGaussianParamCount; ++k) {
        const double fd = refined_difference(
            [&](double v) {
              SceneModel s = scene;
              gaussian_param(s.gaussians[i], k) = v;
              return weighted_sum(render(s, cam, t).image, w);
            },
            gaussian_param(scene.gaussians[i], k), h, &refined);
        render_w.add(gaussian_grad(g.gaussians[i], k), fd, 1e-4, 1e-6,
                     fmt::format("scene {} gaussian {} {}", trial, i, kGaussianFieldNames[gaussian_field_of(k)]));
      }
    for (int k = 0; k < 7; ++k) {
      const double fd = refined_difference(
          [&](double v) {
            Camera c = cam;
            camera_param(c, k) = v;
            return weighted_sum(render(scene, c, t).image, w);
          },
          camera_param(cam, k), h, &refined);
      render_w.add(camera_grad(g, k), fd, 1e-4, 1e-6, fmt::format("scene {} camera {}", trial, k));
    }

    // delta_t and the uncertainty map through interpolation, render and L_ca.
    PosePair pair;
    pair.p_start = cam.pose;
    pair.p_end = cam.pose * Pose{Quat::from_axis_angle(Vec3(0.3, 1.0, 0.1), 0.04), Vec3(0.15, 0.02, 0.05)};
    pair.time_start = t - 0.05;
    pair.time_end = t + 0.05;
    PseudoFrame pseudo;
    pseudo.image = random_image(64, 64, 3, rng, 0.0, 1.0);
    UncertaintyMap umap(64, 64, 1.0);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (double& v : umap.raw.data) v = nd(rng);
    const DistillWeights dw{};
    const double dt0 = std::uniform_real_distribution<double>(-1.5, 1.5)(rng);
    const DistillResult r = distill_step(scene, cam, pair, {0, dt0}, pseudo, umap, dw);
    dt_w.add(r.grad_delta_t,
             refined_difference(
                 [&](double d) { return distill_step(scene, cam, pair, {0, d}, pseudo, umap, dw).loss_ca; }, dt0, h,
                 &refined),
             1e-3, 1e-9, fmt::format("scene {} delta_t", trial));
    const CaResult ca = l_ca(r.render.image, pseudo.image, umap, dw);
    for (size_t p = 0; p < umap.raw.data.size(); ++p) {
      UncertaintyMap m = umap;
      const double fd = central_difference(
          [&](double v) {
            m.raw.data[p] = v;
            return l_ca(r.render.image, pseudo.image, m, dw).loss;
          },
          umap.raw.data[p], h);
      beta_w.add(ca.grad_raw.data[p], fd, 1e-4, 1e-10, fmt::format("scene {} beta pixel {}", trial, p));
    }
  }
  const bool pass = render_w.ratio <= 1 && dt_w.ratio <= 1 && beta_w.ratio <= 1 && clock.seconds() < 300;
  return {pass, fmt::format("{} scenes, {} render + {} delta_t + {} beta checks; worst/tol render {:.3f} ({}), "
                            "delta_t {:.3f}, beta {:.3f}; {} stencils refined across a discontinuity; {:.0f} s",
                            scenes, render_w.checks, dt_w.checks, beta_w.checks, render_w.ratio, render_w.where,
                            dt_w.ratio, beta_w.ratio, refined, clock.seconds())};
}

Verdict closed_form_optimum() {
  const Clock clock;
  std::mt19937_64 rng(77);
  double worst = 0.0, worst_raw = 0.0;
  int diverged = 0;
  const DistillWeights dw{1.0, 1.0, 0.0};
  const int kSteps = 200, kRawSteps = 40000;
  const int w = 16, h = 12, n = w * h;
  for (int trial = 0; trial < 10; ++trial) {
    const Image a = random_image(w, h, 3, rng, 0.0, 1.0);
    const Image b = random_image(w, h, 3, rng, 0.0, 1.0);
    const Image target = beta_opt(a, b, dw.lambda_f);
    const double init = std::uniform_real_distribution<double>(0.01, 2.0)(rng);

    // Projected steps on the exposed beta; dL/dbeta = dL/draw / softplus'(raw).
    Image beta(w, h, 1, init);
    for (int it = 0; it < kSteps; ++it) {
      UncertaintyMap m(w, h, 1.0);
      for (int i = 0; i < n; ++i) m.raw.data[i] = softplus_inverse(std::max(beta.data[i], 1e-12));
      const CaResult r = l_ca(a, b, m, dw);
      for (int i = 0; i < n; ++i) {
        const double g = r.grad_raw.data[i] / sigmoid(m.raw.data[i]);
        beta.data[i] = std::max(0.0, beta.data[i] + 0.25 * n * g);  // the training update ascends L_ca
      }
    }
    // The same updates in the softplus parameter used during training, and
    // literal descent on +L_ca for contrast.
    UncertaintyMap m(w, h, init), literal(w, h, init);
    for (int it = 0; it < kRawSteps; ++it) {
      const CaResult r = l_ca(a, b, m, dw);
      const CaResult rl = l_ca(a, b, literal, dw);
      for (int i = 0; i < n; ++i) {
        m.raw.data[i] += 2.0 * n * r.grad_raw.data[i];
        literal.raw.data[i] -= 2.0 * n * rl.grad_raw.data[i];
      }
    }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        worst = std::max(worst, std::abs(beta.at(x, y) - target.at(x, y)));
        worst_raw = std::max(worst_raw, std::abs(m.beta(x, y) - target.at(x, y)));
        if (literal.beta(x, y) > 10.0) ++diverged;
      }
  }
  return {worst < 1e-3 && clock.seconds() < 60,
          fmt::format("update direction of training (descent on -L_ca), {} projected steps on beta: max |beta - "
                      "e/(2 lambda)| = {:.2e} over 10 random pairs; in the softplus parameter after {} steps {:.2e}; "
                      "descent on +L_ca drives {} of {} pixels past beta 10 (the stationary point is a maximum); "
                      "{:.0f} s",
                      kSteps, worst, kRawSteps, worst_raw, diverged, 10 * n, clock.seconds())};
}

Verdict slerp_linearization(const fs::path& out) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(0.0, 1.0);
  auto gap = [&](double deg, int trials) {
    double g = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
      const Quat a = random_unit_quat(rng);
      const Quat b = (a * Quat::from_axis_angle(Vec3(nd(rng), nd(rng), nd(rng)), deg * kPi / 180.0)).normalized();
      for (int i = 0; i <= 100; ++i) {
        const double s = 0.01 * i;
        g = std::max(g, (lerp_quat(a, b, s).vec() - slerp_exact(a, b, s).vec()).cwiseAbs().maxCoeff());
      }
    }
    return g;
  };
  double small = 0.0;
  for (double deg = 0.25; deg <= 2.0; deg += 0.25) small = std::max(small, gap(deg, 50));
  std::ofstream csv(out / "slerp_deviation.csv");
  csv << "theta_deg,max_component_gap\n";
  std::string curve;
  for (int deg = 2; deg <= 60; deg += 2) {
    const double g = gap(deg, 20);
    csv << deg << "," << fmt::format("{:.6e}", g) << "\n";
    if (deg % 10 == 0) curve += fmt::format(" {}deg:{:.1e}", deg, g);
  }
  return {small < 1e-5, fmt::format("max gap for theta <= 2 deg {:.2e}; curve{}", small, curve)};
}

Verdict delta_t_recovery() {
  const Clock clock;
  ExperimentConfig cfg;
  cfg.scene = "panning";
  cfg.arm = Arm::Jto;
  cfg.resolution_factors = {4};
  cfg.train.total_iters = 2000;  // 500 distillation steps at period 4
  cfg.train.holdout_eval_period = 0;
  cfg.train.distill_brackets = {7};
  cfg.oracle = oracle_preset("clean");
  cfg.oracle.hidden_s = 0.3;
  const Experiment ex = prepare_experiment(cfg, "panning");
  std::vector<double> finals;
  std::string detail;
  for (double d0 : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
    cfg.train.initial_delta_t = d0;
    Trainer t(ex.capture, ex.oracle.get(), cfg.train_config(), ex.init);
    t.run();
    const double s = sigmoid(t.state().delta_t[7]);
    finals.push_back(s);
    detail += fmt::format(" {:+.0f}->{:.4f}", d0, s);
  }
  const auto [lo, hi] = std::minmax_element(finals.begin(), finals.end());
  double worst = 0.0;
  for (double s : finals) worst = std::max(worst, std::abs(s - 0.3));
  return {worst < 0.02 && *hi - *lo < 0.05 && clock.seconds() < 600,
          fmt::format("hidden 0.3, 500 distillation steps, init->final{}; max error {:.4f}, spread {:.4f}; {:.0f} s",
                      detail, worst, *hi - *lo, clock.seconds())};
}

Verdict ablation_trend(const std::vector<SceneReport>& reports, double seconds) {
  const std::vector<double> m = mean_psnr(reports);
  const bool ordered = m[0] <= m[1] && m[1] <= m[2] && m[2] <= m[3];
  const double ud = m[3] - m[2], total = m[3] - m[0];
  return {ordered && ud >= 1.0 && total >= 1.5 && seconds < 3600,
          fmt::format("mean PSNR baseline {:.2f}, +pseudo {:.2f}, +JTO {:.2f}, +JTO+UD {:.2f}; ordered {}; "
                      "UD-JTO {:+.2f} dB (need 1.0), UD-baseline {:+.2f} dB (need 1.5); {:.0f} s",
                      m[0], m[1], m[2], m[3], ordered ? "yes" : "no", ud, total, seconds)};
}

Verdict uncertainty_localization(const std::vector<SceneReport>& reports) {
  bool pass = true;
  std::string detail = "corrupted-mover / background beta:";
  for (const SceneReport& r : reports) {
    if (!r.localization) {
      pass = false;
      detail += fmt::format(" {} n/a", r.scene);
      continue;
    }
    const Localization& l = *r.localization;
    pass = pass && l.ratio() >= 2.0;
    detail += fmt::format(" {} {:.3f}/{:.3f}={:.2f}", r.scene.substr(r.scene.find(':') + 1), l.corrupted_mover_beta,
                          l.background_beta, l.ratio());
  }
  return {pass, detail};
}

Verdict flow_error_correlation(const std::vector<SceneReport>& reports) {
  std::vector<ObjectError> base, full;
  for (const SceneReport& r : reports) {
    base.insert(base.end(), r.object_errors.front().begin(), r.object_errors.front().end());
    full.insert(full.end(), r.object_errors.back().begin(), r.object_errors.back().end());
  }
  const FlowErrorSummary sb = summarize_flow_error(base);
  const std::vector<size_t> top = top_quartile_by_flow(base);
  const double eb = mean_error(base, top), ef = mean_error(full, top);
  const double reduction = eb > 0 ? 1.0 - ef / eb : 0.0;
  return {sb.pearson_r > 0.5 && reduction >= 0.3,
          fmt::format("{} objects; baseline pearson r {:.3f} (need > 0.5); top-quartile mid-frame error baseline "
                      "{:.5f} vs +JTO+UD {:.5f}, reduction {:.1f}% (need 30%)",
                      base.size(), sb.pearson_r, eb, ef, 100.0 * reduction)};
}

Verdict renderer_invariants() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double alpha_lo = 1.0, alpha_hi = 0.0, perm = 0.0, center = 0.0, opacity = 0.0, period = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    SceneModel scene;
    Camera cam;
    random_scene(rng, 40, scene, cam, 48, 48);
    for (PVGaussian& g : scene.gaussians) g.opacity_logit = 8.0 * u(rng) - 2.0;  // reach the alpha clamp too
    const double t = u(rng);
    const RenderOutput a = render(scene, cam, t);
    for (double v : a.alpha_map.data) {
      alpha_lo = std::min(alpha_lo, v);
      alpha_hi = std::max(alpha_hi, v);
    }
    SceneModel shuffled = scene;
    std::shuffle(shuffled.gaussians.begin(), shuffled.gaussians.end(), rng);
    const RenderOutput b = render(shuffled, cam, t);
    for (size_t i = 0; i < a.image.data.size(); ++i) perm = std::max(perm, std::abs(a.image.data[i] - b.image.data[i]));
    for (const PVGaussian& g : scene.gaussians) {
      center = std::max(center, (position_at(g, g.tau, scene.cycle_length) - g.mu).cwiseAbs().maxCoeff());
      opacity = std::max(opacity, std::abs(opacity_at(g, g.tau) - g.base_opacity()));
      const double q = 4.0 * u(rng) - 2.0;
      for (int k : {1, 3})
        period = std::max(period, (position_at(g, q + k * scene.cycle_length, scene.cycle_length) -
                                   position_at(g, q, scene.cycle_length))
                                      .cwiseAbs()
                                      .maxCoeff());
    }
  }
  const bool pass = alpha_lo >= 0 && alpha_hi <= 1 && perm <= 1e-12 && center == 0 && opacity == 0 && period < 1e-12;
  return {pass, fmt::format("50 random scenes: alpha in [{:.3g}, {:.6g}], permutation max diff {:.1e}, "
                            "|mu(tau) - mu| {:.1e}, |o(tau) - o| {:.1e}, period gap {:.1e}",
                            alpha_lo, alpha_hi, perm, center, opacity, period)};
}

std::string bytes_of(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

Verdict determinism(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.scene = "fastmover-6:4";
  cfg.seed = 11;
  cfg.resolution_factors = {16, 8};
  cfg.train.total_iters = 300;
  cfg.train.holdout_eval_period = 100;
  const Experiment ex = prepare_experiment(cfg, cfg.scene);
  const TrainConfig tc = cfg.train_config(Arm::Full);
  auto logs = [](const Trainer& t) {
    std::string s;
    for (const LogRow& r : t.log()) s += csv_line(r) + "\n";
    return s;
  };
  Trainer a(ex.capture, ex.oracle.get(), tc, ex.init);
  a.run();
  Trainer b(ex.capture, ex.oracle.get(), tc, ex.init);
  b.run();
  const bool rerun = logs(a) == logs(b);

  Trainer first(ex.capture, ex.oracle.get(), tc, ex.init);
  first.run(137);
  save_checkpoint(Checkpoint{emit_config(cfg), cfg.scene, "+JTO+UD", first.state()}, out / "resume.ckpt");
  Trainer second(ex.capture, ex.oracle.get(), tc, SceneModel{});
  second.restore(load_checkpoint(out / "resume.ckpt").state);
  second.run();
  const std::string full_log = logs(a);
  const std::string resumed = logs(first) + logs(second);
  save_checkpoint(Checkpoint{"", "", "", a.state()}, out / "final_a.ckpt");
  save_checkpoint(Checkpoint{"", "", "", second.state()}, out / "final_resumed.ckpt");
  const bool resume = resumed == full_log && bytes_of(out / "final_a.ckpt") == bytes_of(out / "final_resumed.ckpt");
  return {rerun && resume,
          fmt::format("threads {}, 300 iters: rerun logs identical {}; resume at 137 logs+state identical {}",
                      thread_cap(), rerun ? "yes" : "no", resume ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  std::string out = "acceptance_out";
  std::vector<int> only;
  app.add_option("--out", out, "artifact directory");
  app.add_option("--only", only, "run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(out);
  auto want = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };

  std::map<int, Verdict> verdicts;
  auto report = [&](int c, const char* name, const Verdict& v) {
    verdicts[c] = v;
    std::cout << fmt::format("criterion {} {:<28} {}  {}\n", c, name, v.pass ? "PASS" : "FAIL", v.detail)
              << std::flush;
  };
  try {
    if (want(1)) report(1, "gradient-correctness", gradient_correctness());
    if (want(2)) report(2, "closed-form-uncertainty", closed_form_optimum());
    if (want(3)) report(3, "slerp-linearization", slerp_linearization(out));
    if (want(4)) report(4, "timestamp-recovery", delta_t_recovery());
    if (want(5) || want(6) || want(7)) {
      const Clock clock;
      ExperimentConfig cfg;
      cfg.train.holdout_eval_period = 0;
      std::vector<SceneReport> reports;
      for (const std::string& name : expand_scene(cfg.scene)) {
        reports.push_back(run_scene(prepare_experiment(cfg, name), cfg, cfg.arms));
        std::cerr << fmt::format("  {} done ({:.0f} s)\n", name, clock.seconds());
      }
      const double seconds = clock.seconds();
      std::ofstream(fs::path(out) / "ablation.txt") << ablation_table(reports);
      std::ofstream(fs::path(out) / "ablation.csv") << ablation_csv(reports);
      std::ofstream(fs::path(out) / "flow_error.csv") << flow_error_csv(reports);
      std::cout << ablation_table(reports);
      if (want(5)) report(5, "ablation-trend", ablation_trend(reports, seconds));
      if (want(6)) report(6, "uncertainty-localization", uncertainty_localization(reports));
      if (want(7)) report(7, "flow-error-correlation", flow_error_correlation(reports));
    }
    if (want(8)) report(8, "renderer-invariants", renderer_invariants());
    if (want(9)) report(9, "determinism", determinism(out));
  } catch (const std::exception& e) {
    std::cerr << "acceptance: error: " << e.what() << "\n";
    return 2;
  }
  int failed = 0;
  for (const auto& [c, v] : verdicts) failed += !v.pass;
  std::cout << fmt::format("acceptance: {} of {} criteria passed\n", verdicts.size() - failed, verdicts.size());
  return failed == 0 ? 0 : 1;
}
