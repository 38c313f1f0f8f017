#pragma once

// YAML experiment configuration. Every field is optional on input; unknown
// keys are errors. Emission writes every field with full double precision so
// load(save(c)) == c.

#include "pvg4d/oracle.hpp"
#include "pvg4d/scene_synth.hpp"
#include "pvg4d/train.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace pvg4d {

/// Message carries "file:line:column: reason".
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string scene = "fastmover-6";  // fastmover-6 (all six), fastmover-6:1..6 or panning
  std::string capture_dir;            // optional: train on this capture instead of a fresh one
  uint64_t seed = 0;
  std::string out = "runs/default";
  Arm arm = Arm::Full;
  std::vector<Arm> arms = {Arm::Baseline, Arm::Pseudo, Arm::Jto, Arm::Full};
  std::vector<int> resolution_factors = {16, 8, 4, 2};
  double holdout_fraction = 1.0;
  InitOptions init;
  TrainConfig train;  // schedule and seed are derived, see train_config()
  OracleConfig oracle = oracle_preset("streetlike");

  /// `train` with the equal-split schedule, the seed and the arm applied.
  TrainConfig train_config(Arm arm) const;
  TrainConfig train_config() const { return train_config(arm); }
  void validate() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

ExperimentConfig parse_config(const std::string& yaml_text, const std::string& source = "<string>");
ExperimentConfig load_config(const std::string& path);
std::string emit_config(const ExperimentConfig& cfg);
void save_config(const ExperimentConfig& cfg, const std::string& path);

/// "16,8,4,2" -> {16, 8, 4, 2}.
std::vector<int> parse_int_list(const std::string& text);
std::vector<Arm> parse_arm_list(const std::string& text);

/// Expands a config scene selector into single scene names.
std::vector<std::string> expand_scene(const std::string& scene);
BenchmarkScene benchmark_scene(const std::string& name);

}  // namespace pvg4d
