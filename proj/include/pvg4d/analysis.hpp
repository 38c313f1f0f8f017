#pragma once

// Flow/error analysis of held-out mid-frames and uncertainty-map localization.

#include "pvg4d/distill.hpp"
#include "pvg4d/scene_synth.hpp"

#include <string>
#include <vector>

namespace pvg4d {

struct ObjectError {
  std::string scene;
  int object = 0;
  double flow_px = 0.0;    // mean analytic flow over the held-out brackets
  double mid_error = 0.0;  // mean squared error inside the object mask at held-out times
};

/// One row per mover of `scene`, measured on every held-out mid-frame.
std::vector<ObjectError> object_mid_errors(const SynthScene& scene, const Capture& capture,
                                           const SceneModel& model, const std::string& scene_name);

/// Indices of the rows whose flow is in the top quartile (at least one row).
std::vector<size_t> top_quartile_by_flow(const std::vector<ObjectError>& rows);

double mean_error(const std::vector<ObjectError>& rows, const std::vector<size_t>& subset);

struct FlowErrorSummary {
  double pearson_r = 0.0;
  double top_quartile_error = 0.0;
};
FlowErrorSummary summarize_flow_error(const std::vector<ObjectError>& rows);

struct Localization {
  double corrupted_mover_beta = 0.0;
  double background_beta = 0.0;
  size_t corrupted_mover_pixels = 0;
  size_t background_pixels = 0;
  double ratio() const { return background_beta > 0 ? corrupted_mover_beta / background_beta : 0.0; }
};

/// Corrupted mover pixels: in the oracle error mask and inside a mover at the
/// hidden time. Background: outside every mover footprint and outside the mask.
Localization uncertainty_localization(const SynthScene& scene, const Capture& capture,
                                      const PosePair& pair, const PseudoFrame& pseudo,
                                      const UncertaintyMap& umap);

/// White canvas with axes and one dot per point; series colors cycle.
Image scatter_plot(const std::vector<std::vector<std::pair<double, double>>>& series, int width,
                   int height);

}  // namespace pvg4d
