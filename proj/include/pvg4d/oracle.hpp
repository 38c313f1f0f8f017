#pragma once

// Synthetic pseudo-frame provider. Renders the ground-truth scene between two
// capture frames at a hidden interpolation fraction and applies controlled,
// view-inconsistent corruptions. Anything that could produce mid-frame images
// (for example a video interpolation model) can sit behind the same
// generate() contract.

#include "pvg4d/distill.hpp"
#include "pvg4d/scene_synth.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pvg4d {

class MissingMeta : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Local 2D warp over a full-resolution pixel rectangle [x0, x1) x [y0, y1).
struct WarpPatch {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  Vec2 displacement = Vec2::Zero();  // full-resolution pixels

  friend bool operator==(const WarpPatch& a, const WarpPatch& b) {
    return a.x0 == b.x0 && a.y0 == b.y0 && a.x1 == b.x1 && a.y1 == b.y1 && a.displacement == b.displacement;
  }
};

struct OracleConfig {
  std::string name = "clean";
  double hidden_s = 0.5;
  double pose_jitter_rotation = 0.0;     // radians, per axis std
  double pose_jitter_translation = 0.0;  // world units, per axis std
  double color_noise_sigma = 0.0;
  std::vector<WarpPatch> warp_patches;
  double mover_warp_px = 0.0;  // random-direction warp on each mover's box
  double mover_blur_sigma = 0.0;
  uint64_t seed = 7;

  void validate() const;
  bool corrupts() const;

  friend bool operator==(const OracleConfig&, const OracleConfig&) = default;
};

/// "clean", "biased" or "streetlike". Throws std::invalid_argument otherwise.
OracleConfig oracle_preset(const std::string& name);

class Oracle {
 public:
  Oracle(SynthScene truth, Camera intrinsics, OracleConfig cfg);

  const OracleConfig& config() const { return cfg_; }

  /// Pseudo-frame for the bracket (frame, frame + 1) rendered at 1/factor
  /// resolution. `salt` distinguishes regenerations of the same bracket.
  PseudoFrame generate(const PosePair& pair, int bracket_start, int factor,
                       uint64_t salt = 0) const;

 private:
  SynthScene truth_;
  Camera intrinsics_;
  OracleConfig cfg_;
};

/// Where local corruption (warps, blur) was injected. Global noise and pose
/// jitter are recorded in the config only.
std::vector<unsigned char> oracle_error_mask(const PseudoFrame& pseudo);

/// Bilinear warp of `img` inside the rectangle with a raised-cosine window.
Image warp_region(const Image& img, int x0, int y0, int x1, int y1, const Vec2& displacement);

}  // namespace pvg4d
