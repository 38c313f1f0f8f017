#pragma once

// Uncertainty-weighted distillation of pseudo-frames. Each pseudo-frame owns
// a per-pixel weight map beta stored unconstrained and exposed through
// softplus. The confidence-aware loss is
//
//   L_ca = mean_p omega_f * (beta(p) * e(p) - lambda_f * beta(p)^2)
//
// with e(p) the channel-summed squared residual. L_ca is concave in beta and
// its stationary point beta* = e / (2 lambda_f) is a maximum, so the map is
// trained by ascent on L_ca (descent on -L_ca) while the scene and the
// timestamp bias descend on it. The smoothness term is always descended.

#include "pvg4d/image.hpp"
#include "pvg4d/pose_interp.hpp"
#include "pvg4d/rasterizer.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pvg4d {

inline constexpr double kMaxUncertainty = 1e3;

class UncertaintyMap {
 public:
  UncertaintyMap() = default;
  UncertaintyMap(int width, int height, double initial_beta, int frame_id = 0);

  int width() const { return raw.width; }
  int height() const { return raw.height; }

  /// softplus(raw) clamped to kMaxUncertainty.
  double beta(int x, int y) const;
  /// d beta / d raw (zero where the clamp is active).
  double dbeta_draw(int x, int y) const;
  Image exposed() const;
  double mean_beta() const;

  Image raw;  // 1 channel
  int frame_id = 0;
};

/// Test-only ground truth attached by the oracle. Never read by training.
struct OracleMeta {
  double hidden_s = 0.5;
  std::string preset;
  std::vector<unsigned char> corruption_mask;  // width*height, row-major
};

struct PseudoFrame {
  Image image;          // 3 channels in [0,1]
  int bracket_start = 0;  // training frame t; the bracket is (t, t+1)
  std::optional<OracleMeta> meta;
};

struct DistillWeights {
  double omega_f = 1.0;
  double lambda_f = 1.0;
  double omega_tv = 0.001;

  friend bool operator==(const DistillWeights&, const DistillWeights&) = default;
};

struct CaResult {
  double loss = 0.0;
  Image grad_image;  // dL_ca / d render
  Image grad_raw;    // dL_ca / d umap.raw
};

CaResult l_ca(const Image& render, const Image& pseudo, const UncertaintyMap& umap,
              const DistillWeights& w);

/// Per-pixel channel-summed squared residual.
Image residual_energy(const Image& render, const Image& pseudo);
/// e / (2 lambda_f), clamped like the exposed map.
Image beta_opt(const Image& render, const Image& pseudo, double lambda_f);

struct TvResult {
  double loss = 0.0;
  Image grad_raw;
};

/// omega_tv * (1 / (H W)) * sum |forward differences| of the exposed map.
TvResult l_tv(const UncertaintyMap& umap, double omega_tv);

struct DistillResult {
  double loss_ca = 0.0;
  double loss_tv = 0.0;
  GradientBuffer scene_grad;
  double grad_delta_t = 0.0;
  /// Gradient for a minimizer of (-L_ca + L_tv) in umap.raw.
  Image umap_update_grad;
  RenderOutput render;
};

struct DistillOptions {
  bool use_uncertainty = true;  // false: beta treated as a frozen constant 1
  bool want_delta_t = true;
};

/// interp_pose -> render at the pseudo-frame resolution -> L_ca + L_tv ->
/// adjoint. `camera` supplies the full-resolution intrinsics; its pose is
/// replaced by the interpolated one.
DistillResult distill_step(const SceneModel& scene, const Camera& camera, const PosePair& pair,
                           const TimestampParam& tsp, const PseudoFrame& pseudo,
                           const UncertaintyMap& umap, const DistillWeights& w,
                           const DistillOptions& opts = {});

}  // namespace pvg4d
