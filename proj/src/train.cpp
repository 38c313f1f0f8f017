#include "pvg4d/train.hpp"

#include "pvg4d/metrics.hpp"
#include "pvg4d/rasterizer.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>
#include <span>

namespace pvg4d {

namespace {

constexpr int kGroupSize[kGaussianGroups] = {3, 4, 3, 1, 3, 3, 1, 1};

double* group_ptr(PVGaussian& g, int group) {
  switch (group) {
    case 0: return g.mu.data();
    case 1: return &g.rot.w;
    case 2: return g.log_scale.data();
    case 3: return &g.opacity_logit;
    case 4: return g.color.data();
    case 5: return g.velocity.data();
    case 6: return &g.tau;
    default: return &g.log_beta;
  }
}

const double* grad_ptr(const GaussianGrad& g, int group) {
  switch (group) {
    case 0: return g.mu.data();
    case 1: return g.rot.data();
    case 2: return g.log_scale.data();
    case 3: return &g.opacity_logit;
    case 4: return g.color.data();
    case 5: return g.velocity.data();
    case 6: return &g.tau;
    default: return &g.log_beta;
  }
}

bool valid_factor(int f) { return f == 1 || f == 2 || f == 4 || f == 8 || f == 16; }

std::string optional_field(const std::optional<double>& v) {
  return v ? fmt::format("{:.17g}", *v) : std::string();
}

}  // namespace

const char* gaussian_group_name(int group) {
  static const char* names[kGaussianGroups] = {"position", "rotation", "log_scale", "opacity",
                                               "color",    "velocity", "tau",       "log_beta"};
  return names[group];
}

std::vector<ResolutionStage> equal_split_schedule(const std::vector<int>& factors, int total_iters) {
  std::vector<ResolutionStage> out;
  const int n = static_cast<int>(factors.size());
  for (int i = 0; i < n; ++i)
    out.push_back({1 + static_cast<int>(static_cast<int64_t>(total_iters) * i / n), factors[i]});
  return out;
}

std::string arm_name(Arm arm) {
  switch (arm) {
    case Arm::Baseline: return "baseline";
    case Arm::Pseudo: return "+pseudo";
    case Arm::Jto: return "+JTO";
    default: return "+JTO+UD";
  }
}

Arm parse_arm(const std::string& name) {
  if (name == "baseline") return Arm::Baseline;
  if (name == "+pseudo" || name == "pseudo") return Arm::Pseudo;
  if (name == "+JTO" || name == "jto") return Arm::Jto;
  if (name == "+JTO+UD" || name == "full") return Arm::Full;
  throw std::invalid_argument("unknown ablation arm '" + name + "'");
}

void TrainConfig::validate() const {
  if (total_iters < 1) throw std::invalid_argument("total_iters must be >= 1");
  if (distill_period < 1) throw std::invalid_argument("distill_period must be >= 1");
  if (schedule.empty()) throw std::invalid_argument("resolution schedule is empty");
  if (schedule.front().start_iter != 1) throw std::invalid_argument("resolution schedule must start at iteration 1");
  for (size_t i = 0; i < schedule.size(); ++i) {
    if (!valid_factor(schedule[i].factor))
      throw std::invalid_argument("resolution factor " + std::to_string(schedule[i].factor) +
                                  " is not one of 1, 2, 4, 8, 16");
    if (i > 0 && schedule[i].start_iter <= schedule[i - 1].start_iter)
      throw std::invalid_argument("resolution schedule iterations must increase");
    if (i > 0 && schedule[i].factor > schedule[i - 1].factor)
      throw std::invalid_argument("resolution factors must be non-increasing");
  }
  if (!valid_factor(eval_factor)) throw std::invalid_argument("eval_factor must be 1, 2, 4, 8 or 16");
  if (l1_weight < 0 || ssim_weight < 0) throw std::invalid_argument("photometric weights must be >= 0");
  if (distill.omega_f < 0 || distill.lambda_f < 0 || distill.omega_tv < 0)
    throw std::invalid_argument("distillation weights must be >= 0");
  if (prune_threshold < 0 || prune_interval < 0 || holdout_eval_period < 0)
    throw std::invalid_argument("prune/eval settings must be >= 0");
  if (!(initial_uncertainty > 0)) throw std::invalid_argument("initial_uncertainty must be > 0");
  if (!std::isfinite(initial_delta_t)) throw std::invalid_argument("initial_delta_t must be finite");
}

int TrainConfig::stage_at(int iter) const {
  int s = 0;
  for (size_t i = 0; i < schedule.size(); ++i)
    if (iter >= schedule[i].start_iter) s = static_cast<int>(i);
  return s;
}

int TrainConfig::factor_at(int iter) const { return schedule[stage_at(iter)].factor; }

TrainConfig config_for_arm(TrainConfig base, Arm arm) {
  base.use_pseudo = arm != Arm::Baseline;
  base.optimize_delta_t = arm == Arm::Jto || arm == Arm::Full;
  base.use_uncertainty = arm == Arm::Full;
  return base;
}

PhotoLoss photometric_loss(const Image& render, const Image& gt, double l1_w, double ssim_w) {
  require_same_shape(render, gt, "photometric_loss");
  PhotoLoss out;
  const double inv = 1.0 / static_cast<double>(render.data.size());
  Image g_ssim;
  const double s = ssim_w > 0 ? ssim_with_grad(render, gt, &g_ssim) : 1.0;
  out.grad = Image(render.width, render.height, render.channels);
  double l1 = 0;
  for (size_t i = 0; i < render.data.size(); ++i) {
    const double d = render.data[i] - gt.data[i];
    l1 += std::abs(d);
    out.grad.data[i] = l1_w * (d > 0 ? inv : (d < 0 ? -inv : 0.0));
    if (ssim_w > 0) out.grad.data[i] -= ssim_w * g_ssim.data[i];
  }
  out.loss = l1_w * l1 * inv + ssim_w * (1.0 - s);
  return out;
}

std::string csv_header(size_t brackets) {
  std::string h = "iter,view_id,factor,photo_loss,distill_loss,tv_loss,psnr_holdout";
  for (size_t k = 0; k < brackets; ++k) h += fmt::format(",s_{}", k);
  return h;
}

std::string csv_line(const LogRow& r) {
  std::string s = fmt::format("{},{},{},{:.17g},{},{},{}", r.iter, r.view_id, r.factor, r.photo_loss,
                              optional_field(r.distill_loss), optional_field(r.tv_loss),
                              optional_field(r.psnr_holdout));
  for (double f : r.fractions) s += fmt::format(",{:.17g}", f);
  return s;
}

HoldoutScore evaluate_holdout(const SceneModel& model, const Capture& capture, int factor) {
  HoldoutScore out;
  if (capture.holdout.empty()) return out;
  for (const CaptureFrame& h : capture.holdout) {
    const Image img = render_downsampled(model, capture.camera_for(h.pose), h.time, factor).image;
    const Image gt = factor == 1 ? h.image : box_downsample(h.image, factor);
    const double p = psnr(img, gt);
    out.per_frame_psnr.push_back(p);
    out.psnr += p;
    out.ssim += ssim(img, gt);
    out.gm_ssim += gm_ssim_proxy(img, gt);
  }
  const double n = static_cast<double>(capture.holdout.size());
  out.psnr /= n;
  out.ssim /= n;
  out.gm_ssim /= n;
  return out;
}

Trainer::Trainer(const Capture& capture, const Oracle* oracle, TrainConfig cfg, SceneModel init)
    : capture_(capture), oracle_(oracle), cfg_(std::move(cfg)) {
  cfg_.validate();
  if (capture_.frames.size() < 2) throw std::invalid_argument("training needs at least two frames");
  if (cfg_.use_pseudo && !oracle_) throw std::invalid_argument("pseudo-frame arms need an oracle");
  state_.model = std::move(init);
  const size_t brackets = capture_.frames.size() - 1;
  for (int b : cfg_.distill_brackets)
    if (b < 0 || b >= static_cast<int>(brackets))
      throw std::invalid_argument("distill bracket " + std::to_string(b) + " out of range");
  state_.delta_t.assign(brackets, cfg_.initial_delta_t);
  state_.delta_t_adam.resize(brackets);
  state_.umap_adam.resize(brackets);

  Vec3 centroid = Vec3::Zero();
  for (const PVGaussian& g : state_.model.gaussians) centroid += g.mu;
  if (!state_.model.gaussians.empty()) centroid /= static_cast<double>(state_.model.gaussians.size());
  double radius = 0;
  for (const PVGaussian& g : state_.model.gaussians) radius = std::max(radius, (g.mu - centroid).norm());
  state_.spatial_extent = radius > 0 ? 1.1 * radius : 1.0;
}

void Trainer::restore(TrainState state) {
  state_ = std::move(state);
  stage_ = -1;
}

void Trainer::enter_stage(int stage) {
  stage_ = stage;
  if (!cfg_.use_pseudo) return;
  const int factor = cfg_.schedule[stage].factor;
  const size_t brackets = state_.delta_t.size();
  pseudo_.clear();
  for (size_t k = 0; k < brackets; ++k)
    pseudo_.push_back(oracle_->generate(capture_.pair(static_cast<int>(k)), static_cast<int>(k),
                                        factor, static_cast<uint64_t>(stage)));
  if (!cfg_.use_uncertainty) return;
  const int w = pseudo_.front().image.width, h = pseudo_.front().image.height;
  state_.umaps.resize(brackets);
  for (size_t k = 0; k < brackets; ++k) {
    UncertaintyMap& m = state_.umaps[k];
    if (m.width() == w && m.height() == h) continue;
    if (m.width() == 0) {
      m = UncertaintyMap(w, h, cfg_.initial_uncertainty, static_cast<int>(k));
    } else if (w > m.width()) {
      m.raw = nearest_upsample(m.raw, w / m.width());
    } else {
      m.raw = box_downsample(m.raw, m.width() / w);
    }
    state_.umap_adam[k] = AdamState{};
  }
}

int Trainer::pick_view(int iter) const {
  std::seed_seq seq{static_cast<uint32_t>(cfg_.seed), static_cast<uint32_t>(cfg_.seed >> 32),
                    static_cast<uint32_t>(iter)};
  std::mt19937_64 rng(seq);
  return static_cast<int>(rng() % capture_.frames.size());
}

void Trainer::apply_gaussian_grads(const GradientBuffer& grad, int iter) {
  auto& gs = state_.model.gaussians;
  const LearningRates& lr = cfg_.lr;
  const double progress = std::clamp(static_cast<double>(iter) / cfg_.total_iters, 0.0, 1.0);
  const double pos_lr = state_.spatial_extent *
                        std::exp((1 - progress) * std::log(lr.position) + progress * std::log(lr.position_final));
  const double frame_interval = capture_.frames[1].time - capture_.frames[0].time;
  const double vel_lr = lr.velocity * state_.spatial_extent / frame_interval;
  const double rates[kGaussianGroups] = {pos_lr,    lr.rotation, lr.log_scale, lr.opacity,
                                         lr.color,  vel_lr,      lr.tau,       lr.log_beta};
  std::vector<double> p, g;
  for (int group = 0; group < kGaussianGroups; ++group) {
    const int k = kGroupSize[group];
    p.resize(gs.size() * k);
    g.resize(gs.size() * k);
    for (size_t i = 0; i < gs.size(); ++i) {
      std::copy_n(group_ptr(gs[i], group), k, p.data() + i * k);
      std::copy_n(grad_ptr(grad.gaussians[i], group), k, g.data() + i * k);
    }
    adam_step(state_.gaussian_adam[group], p, g, rates[group], gaussian_group_name(group));
    for (size_t i = 0; i < gs.size(); ++i) std::copy_n(p.data() + i * k, k, group_ptr(gs[i], group));
  }
}

void Trainer::prune() {
  auto& gs = state_.model.gaussians;
  std::vector<bool> keep(gs.size());
  size_t kept = 0;
  for (size_t i = 0; i < gs.size(); ++i) kept += keep[i] = gs[i].base_opacity() >= cfg_.prune_threshold;
  if (kept == gs.size()) return;
  for (int group = 0; group < kGaussianGroups; ++group) {
    state_.gaussian_adam[group].resize(gs.size() * kGroupSize[group]);
    state_.gaussian_adam[group].compact(keep, kGroupSize[group]);
  }
  size_t out = 0;
  for (size_t i = 0; i < gs.size(); ++i)
    if (keep[i]) gs[out++] = gs[i];
  gs.resize(out);
}

void Trainer::step() {
  const int iter = state_.iteration + 1;
  const int stage = cfg_.stage_at(iter);
  if (stage != stage_) enter_stage(stage);
  const int factor = cfg_.schedule[stage].factor;
  const int view = pick_view(iter);
  const CaptureFrame& frame = capture_.frames[view];
  const Camera cam = capture_.camera_for(frame.pose);

  LogRow row;
  row.iter = iter;
  row.view_id = view;
  row.factor = factor;

  const RenderOutput r = render_downsampled(state_.model, cam, frame.time, factor);
  const Image gt = factor == 1 ? frame.image : box_downsample(frame.image, factor);
  const PhotoLoss pl = photometric_loss(r.image, gt, cfg_.l1_weight, cfg_.ssim_weight);
  row.photo_loss = pl.loss;
  GradientBuffer grad = render_downsampled_backward(state_.model, cam, frame.time, factor, pl.grad);

  std::optional<DistillResult> distill;
  int bracket = -1;
  if (cfg_.use_pseudo && iter % cfg_.distill_period == 0 && !pseudo_.empty()) {
    const int k = iter / cfg_.distill_period - 1;
    bracket = cfg_.distill_brackets.empty()
                  ? k % static_cast<int>(pseudo_.size())
                  : cfg_.distill_brackets[k % cfg_.distill_brackets.size()];
    const TimestampParam tsp{bracket, cfg_.optimize_delta_t ? state_.delta_t[bracket] : 0.0};
    static const UncertaintyMap unused;
    const UncertaintyMap& umap = cfg_.use_uncertainty ? state_.umaps[bracket] : unused;
    distill = distill_step(state_.model, capture_.intrinsics, capture_.pair(bracket), tsp, pseudo_[bracket],
                           umap, cfg_.distill, DistillOptions{cfg_.use_uncertainty, cfg_.optimize_delta_t});
    grad += distill->scene_grad;
    row.distill_loss = distill->loss_ca;
    row.tv_loss = distill->loss_tv;
  }

  try {
    if (!grad.finite()) {
      for (size_t i = 0; i < grad.gaussians.size(); ++i)
        for (int group = 0; group < kGaussianGroups; ++group)
          for (int k = 0; k < kGroupSize[group]; ++k)
            if (!std::isfinite(grad_ptr(grad.gaussians[i], group)[k]))
              throw NonFiniteGradient(gaussian_group_name(group), i);
    }
    if (distill && cfg_.optimize_delta_t) {
      double g = distill->grad_delta_t;
      adam_step(state_.delta_t_adam[bracket], std::span<double>(&state_.delta_t[bracket], 1),
                std::span<const double>(&g, 1), cfg_.lr.delta_t, "delta_t");
    }
    if (distill && cfg_.use_uncertainty)
      adam_step(state_.umap_adam[bracket], state_.umaps[bracket].raw.data,
                distill->umap_update_grad.data, cfg_.lr.uncertainty, "uncertainty");
    apply_gaussian_grads(grad, iter);
  } catch (const NonFiniteGradient& e) {
    std::cerr << fmt::format("non-finite gradient: iteration={} seed={} view={} bracket={} group={} index={}\n",
                             iter, cfg_.seed, view, bracket, e.group(), e.index());
    throw;
  }

  if (cfg_.prune_interval > 0 && iter % cfg_.prune_interval == 0) prune();
  state_.iteration = iter;

  if (cfg_.holdout_eval_period > 0 && iter % cfg_.holdout_eval_period == 0 && !capture_.holdout.empty())
    row.psnr_holdout = evaluate_holdout(state_.model, capture_, cfg_.eval_factor).psnr;
  for (double d : state_.delta_t) row.fractions.push_back(sigmoid(cfg_.optimize_delta_t ? d : 0.0));
  log_.push_back(row);
  if (on_log) on_log(row);
}

void Trainer::run(int until_iter) {
  while (state_.iteration < until_iter) step();
}

std::vector<ArmResult> ablate(const Capture& capture, const Oracle& oracle, const TrainConfig& base,
                              const SceneModel& init, const std::vector<Arm>& arms) {
  std::vector<ArmResult> out;
  for (Arm arm : arms) {
    Trainer t(capture, &oracle, config_for_arm(base, arm), init);
    t.run();
    ArmResult r;
    r.arm = arm;
    r.model = t.state().model;
    r.score = evaluate_holdout(r.model, capture, base.eval_factor);
    for (double d : t.state().delta_t) r.fractions.push_back(sigmoid(t.config().optimize_delta_t ? d : 0.0));
    r.umaps = t.state().umaps;
    r.pseudo = t.pseudo_frames();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace pvg4d
