#pragma once

#include "pvg4d/distill.hpp"
#include "pvg4d/optim.hpp"
#include "pvg4d/oracle.hpp"
#include "pvg4d/scene_synth.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace pvg4d {

struct LearningRates {
  double position = 1.6e-4;  // scaled by the spatial extent, decays exponentially
  double position_final = 1.6e-6;
  double rotation = 1e-3;
  double log_scale = 5e-3;
  double opacity = 5e-2;
  double color = 2.5e-3;
  double velocity = 1e-3;  // scaled by spatial extent / frame interval
  double tau = 1e-3;
  double log_beta = 2e-2;
  double delta_t = 0.01;
  double uncertainty = 0.01;

  friend bool operator==(const LearningRates&, const LearningRates&) = default;
};

struct ResolutionStage {
  int start_iter = 1;  // first iteration (1-based) using this factor
  int factor = 1;

  friend bool operator==(const ResolutionStage&, const ResolutionStage&) = default;
};

/// Equal splits of [1, total_iters] across the factors, in order.
std::vector<ResolutionStage> equal_split_schedule(const std::vector<int>& factors, int total_iters);

enum class Arm { Baseline, Pseudo, Jto, Full };
std::string arm_name(Arm arm);
/// Accepts baseline, +pseudo, +JTO, +JTO+UD (and pseudo, jto, full).
Arm parse_arm(const std::string& name);

struct TrainConfig {
  int total_iters = 4000;
  LearningRates lr;
  int distill_period = 4;
  std::vector<ResolutionStage> schedule = equal_split_schedule({16, 8, 4, 2}, 4000);
  double l1_weight = 0.8;
  double ssim_weight = 0.2;
  int prune_interval = 100;
  double prune_threshold = 0.005;
  int holdout_eval_period = 250;
  int eval_factor = 1;
  bool use_pseudo = false;
  bool optimize_delta_t = false;
  bool use_uncertainty = false;
  double initial_uncertainty = 1.0;
  double initial_delta_t = 0.0;
  std::vector<int> distill_brackets;  // cycled in order; empty = every bracket
  DistillWeights distill;
  uint64_t seed = 0;

  void validate() const;
  int factor_at(int iter) const;
  int stage_at(int iter) const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Baseline: no distillation. Pseudo: distillation at the bracket midpoint
/// with a constant unit weight. Jto: adds the timestamp bias. Full: adds the
/// learnable uncertainty map.
TrainConfig config_for_arm(TrainConfig base, Arm arm);

struct PhotoLoss {
  double loss = 0.0;
  Image grad;
};

/// l1_w * mean|r - g| + ssim_w * (1 - SSIM(r, g)).
PhotoLoss photometric_loss(const Image& render, const Image& gt, double l1_w = 0.8,
                           double ssim_w = 0.2);

inline constexpr int kGaussianGroups = 8;
const char* gaussian_group_name(int group);

struct TrainState {
  int iteration = 0;  // iterations completed
  SceneModel model;
  std::vector<double> delta_t;  // one per bracket
  std::vector<UncertaintyMap> umaps;
  std::array<AdamState, kGaussianGroups> gaussian_adam;
  std::vector<AdamState> delta_t_adam;
  std::vector<AdamState> umap_adam;
  double spatial_extent = 1.0;
};

struct LogRow {
  int iter = 0;
  int view_id = 0;
  int factor = 1;
  double photo_loss = 0.0;
  std::optional<double> distill_loss;
  std::optional<double> tv_loss;
  std::optional<double> psnr_holdout;
  std::vector<double> fractions;  // sigmoid(delta_t) per bracket

  friend bool operator==(const LogRow&, const LogRow&) = default;
};

std::string csv_header(size_t brackets);
std::string csv_line(const LogRow& row);

struct HoldoutScore {
  double psnr = 0.0;
  double ssim = 0.0;
  double gm_ssim = 0.0;
  std::vector<double> per_frame_psnr;
};

HoldoutScore evaluate_holdout(const SceneModel& model, const Capture& capture, int factor = 1);

class Trainer {
 public:
  /// `oracle` may be null when the configuration does not use pseudo-frames.
  Trainer(const Capture& capture, const Oracle* oracle, TrainConfig cfg, SceneModel init);

  void step();
  void run(int until_iter);
  void run() { run(cfg_.total_iters); }

  const TrainConfig& config() const { return cfg_; }
  const TrainState& state() const { return state_; }
  const std::vector<LogRow>& log() const { return log_; }
  const std::vector<PseudoFrame>& pseudo_frames() const { return pseudo_; }

  /// Replaces the state (checkpoint resume) and regenerates the pseudo-frames
  /// of the stage the state is in.
  void restore(TrainState state);

  std::function<void(const LogRow&)> on_log;

 private:
  void enter_stage(int stage);
  int pick_view(int iter) const;
  void apply_gaussian_grads(const GradientBuffer& grad, int iter);
  void prune();

  const Capture& capture_;
  const Oracle* oracle_;
  TrainConfig cfg_;
  TrainState state_;
  std::vector<PseudoFrame> pseudo_;
  int stage_ = -1;
  std::vector<LogRow> log_;
};

struct ArmResult {
  Arm arm = Arm::Baseline;
  HoldoutScore score;
  SceneModel model;
  std::vector<double> fractions;
  std::vector<UncertaintyMap> umaps;
  std::vector<PseudoFrame> pseudo;  // pseudo-frames of the final stage
};

/// Trains every arm from the same initialization and seed.
std::vector<ArmResult> ablate(const Capture& capture, const Oracle& oracle, const TrainConfig& base,
                              const SceneModel& init, const std::vector<Arm>& arms);

}  // namespace pvg4d
