#include "pvg4d/pvg_model.hpp"

#include <cmath>

namespace pvg4d {

Vec3 position_at(const PVGaussian& g, double t, double l) {
  const double phase = 2.0 * kPi * (t - g.tau) / l;
  return g.mu + (l / (2.0 * kPi)) * std::sin(phase) * g.velocity;
}

double opacity_at(const PVGaussian& g, double t) {
  const double dt = t - g.tau;
  const double inv_beta = std::exp(-g.log_beta);
  return g.base_opacity() * std::exp(-0.5 * dt * dt * inv_beta * inv_beta);
}

PositionPartials position_partials(const PVGaussian& g, double t, double l) {
  const double phase = 2.0 * kPi * (t - g.tau) / l;
  PositionPartials p;
  p.d_velocity = (l / (2.0 * kPi)) * std::sin(phase);
  p.d_t = std::cos(phase) * g.velocity;
  p.d_tau = -p.d_t;
  return p;
}

OpacityPartials opacity_partials(const PVGaussian& g, double t) {
  const double o = g.base_opacity();
  const double dt = t - g.tau;
  const double inv_beta2 = std::exp(-2.0 * g.log_beta);
  const double value = o * std::exp(-0.5 * dt * dt * inv_beta2);
  OpacityPartials p;
  p.d_opacity_logit = value * (1.0 - o);
  p.d_t = -value * dt * inv_beta2;
  p.d_tau = -p.d_t;
  p.d_log_beta = value * dt * dt * inv_beta2;
  return p;
}

bool classify_static(const PVGaussian& g, double threshold) { return g.lifespan() >= threshold; }

}  // namespace pvg4d
