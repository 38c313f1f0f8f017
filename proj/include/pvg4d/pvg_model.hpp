#pragma once

// Periodic-vibration Gaussians: a 3D Gaussian whose center oscillates along
// its velocity with the scene-wide cycle length, and whose opacity decays
// with a Gaussian lifespan around its peak time.

#include "pvg4d/geom.hpp"

#include <vector>

namespace pvg4d {

struct PVGaussian {
  Vec3 mu = Vec3::Zero();
  Quat rot;
  Vec3 log_scale = Vec3::Zero();
  double opacity_logit = 0.0;
  Vec3 color = Vec3::Constant(0.5);
  Vec3 velocity = Vec3::Zero();
  double tau = 0.0;
  double log_beta = 0.0;

  double base_opacity() const { return sigmoid(opacity_logit); }
  double lifespan() const { return std::exp(log_beta); }
};

/// Number of scalar parameters of one PVGaussian.
inline constexpr int kGaussianParamCount = 3 + 4 + 3 + 1 + 3 + 3 + 1 + 1;

struct SceneModel {
  std::vector<PVGaussian> gaussians;
  double cycle_length = 0.3;
  Vec3 background = Vec3::Zero();
};

Vec3 position_at(const PVGaussian& g, double t, double cycle_length);
double opacity_at(const PVGaussian& g, double t);

/// Partials of position_at. d/dmu is the identity and not stored.
struct PositionPartials {
  double d_velocity = 0.0;  // scalar multiplying the identity
  Vec3 d_tau = Vec3::Zero();
  Vec3 d_t = Vec3::Zero();
};
PositionPartials position_partials(const PVGaussian& g, double t, double cycle_length);

/// Partials of opacity_at.
struct OpacityPartials {
  double d_opacity_logit = 0.0;
  double d_tau = 0.0;
  double d_log_beta = 0.0;
  double d_t = 0.0;
};
OpacityPartials opacity_partials(const PVGaussian& g, double t);

/// Lifespan-based static/dynamic split. Diagnostic only.
bool classify_static(const PVGaussian& g, double threshold = 0.5);

}  // namespace pvg4d
