#pragma once

// Builds runnable experiments from a config and runs the benchmark arms with
// their per-object and uncertainty analyses.

#include "pvg4d/analysis.hpp"
#include "pvg4d/config.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace pvg4d {

struct Experiment {
  std::string scene_name;
  SynthScene scene;
  Capture capture;
  SceneModel init;
  std::shared_ptr<const Oracle> oracle;
};

/// Scene, capture (synthesized or read from cfg.capture_dir), LiDAR-like
/// initialization seeded from cfg.seed, and the configured oracle.
Experiment prepare_experiment(const ExperimentConfig& cfg, const std::string& scene_name);

struct SceneReport {
  std::string scene;
  std::vector<ArmResult> arms;
  std::vector<std::vector<ObjectError>> object_errors;  // parallel to arms
  std::optional<Localization> localization;              // first arm with an uncertainty map
};

/// Pooled over every final-stage pseudo-frame that carries corruption metadata.
std::optional<Localization> pooled_localization(const Experiment& ex, const ArmResult& arm);

SceneReport run_scene(const Experiment& ex, const ExperimentConfig& cfg, const std::vector<Arm>& arms);

/// Mean held-out PSNR per arm over the reports (arms in report order).
std::vector<double> mean_psnr(const std::vector<SceneReport>& reports);

std::string ablation_table(const std::vector<SceneReport>& reports);
std::string ablation_csv(const std::vector<SceneReport>& reports);
std::string flow_error_csv(const std::vector<SceneReport>& reports);

}  // namespace pvg4d
