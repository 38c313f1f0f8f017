#pragma once

// Exact per-pixel alpha-compositing splatting renderer for PVG scenes and its
// analytic adjoint. Gaussians are evaluated at the query time, projected
// with the EWA affine approximation, depth-sorted on the camera-space z of
// their time-varying center and composited front to back. The adjoint
// covers every PVGaussian field, the camera pose and the query time.

#include "pvg4d/geom.hpp"
#include "pvg4d/image.hpp"
#include "pvg4d/pvg_model.hpp"

#include <vector>

namespace pvg4d {

inline constexpr double kMinAlpha = 1.0 / 255.0;
inline constexpr double kMaxAlpha = 0.999;
inline constexpr int kTileSize = 16;

struct Splat2D {
  Vec2 center = Vec2::Zero();
  Mat2 inv_cov = Mat2::Identity();
  double depth = 0.0;
  Vec3 color = Vec3::Zero();
  double peak_alpha = 0.0;
  int index = -1;  // position in SceneModel::gaussians
};

struct RenderOutput {
  Image image;      // 3 channels
  Image depth_map;  // 1 channel, alpha-normalized expected depth
  Image alpha_map;  // 1 channel
};

struct GaussianGrad {
  Vec3 mu = Vec3::Zero();
  Vec4 rot = Vec4::Zero();
  Vec3 log_scale = Vec3::Zero();
  double opacity_logit = 0.0;
  Vec3 color = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double tau = 0.0;
  double log_beta = 0.0;

  GaussianGrad& operator+=(const GaussianGrad& o);
  GaussianGrad& operator*=(double s);
  bool finite() const;
};

struct GradientBuffer {
  std::vector<GaussianGrad> gaussians;
  Vec4 cam_rotation = Vec4::Zero();
  Vec3 cam_translation = Vec3::Zero();
  double time = 0.0;  // d/dt of the query time

  explicit GradientBuffer(size_t n = 0) : gaussians(n) {}
  GradientBuffer& operator+=(const GradientBuffer& o);
  bool finite() const;
};

/// Projects every Gaussian visible at time t. Culls primitives behind the
/// near plane and primitives that can never reach the minimum alpha. The
/// result is sorted by depth with ties broken by scene index.
std::vector<Splat2D> project_splats(const SceneModel& scene, const Camera& cam, double t);

RenderOutput render(const SceneModel& scene, const Camera& cam, double t);

/// Adjoint of render().image. grad_image has the render's shape.
GradientBuffer render_backward(const SceneModel& scene, const Camera& cam, double t,
                               const Image& grad_image);

/// Renders at (W/factor) x (H/factor) with intrinsics scaled by 1/factor.
/// Throws ResolutionMismatch when the size is not divisible or the factor is
/// not one of 1, 2, 4, 8, 16.
RenderOutput render_downsampled(const SceneModel& scene, const Camera& cam, double t, int factor);
GradientBuffer render_downsampled_backward(const SceneModel& scene, const Camera& cam, double t,
                                           int factor, const Image& grad_image);

Camera downsampled_camera(const Camera& cam, int factor);

}  // namespace pvg4d
