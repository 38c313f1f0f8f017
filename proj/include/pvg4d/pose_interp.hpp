#pragma once

// Camera pose interpolation between two adjacent capture frames, driven by a
// single learnable bias. The interpolation fraction is s = sigmoid(delta_t),
// so the interpolated frame index t + s always stays strictly inside the
// bracket. Rotation uses the normalized linear quaternion blend, translation
// the linear blend; both are differentiated analytically in s.

#include "pvg4d/geom.hpp"
#include "pvg4d/rasterizer.hpp"

namespace pvg4d {

struct TimestampParam {
  int base_index = 0;
  double delta_t = 0.0;

  double fraction() const { return sigmoid(delta_t); }
  /// base_index + sigmoid(delta_t), in frame-index units.
  double mid_index() const { return base_index + fraction(); }
};

struct PosePair {
  Pose p_start;
  Pose p_end;
  double time_start = 0.0;  // normalized scene time of frame t
  double time_end = 1.0;    // normalized scene time of frame t + 1

  /// Copy whose end rotation lies in the start rotation's hemisphere.
  PosePair aligned() const;
};

struct InterpolatedPose {
  Pose pose;
  double time = 0.0;      // normalized scene time at the interpolated frame
  double fraction = 0.0;  // s
  Vec4 d_rotation_ds = Vec4::Zero();
  Vec3 d_translation_ds = Vec3::Zero();
  double d_time_ds = 0.0;
};

/// Exact spherical interpolation. Inputs are expected unit length and
/// hemisphere aligned; falls back to normalized lerp below 1e-6 rad.
Quat slerp_exact(const Quat& a, const Quat& b, double s);

/// normalize((1 - s) a + s b)
Quat lerp_quat(const Quat& a, const Quat& b, double s);
/// d lerp_quat / ds through the normalization.
Vec4 lerp_quat_derivative(const Quat& a, const Quat& b, double s);

/// Interpolated pose at an explicit fraction s in [0, 1].
InterpolatedPose interp_pose_at(const PosePair& pair, double s);
InterpolatedPose interp_pose(const PosePair& pair, const TimestampParam& tsp);

/// Chain rule from the renderer's pose and time gradients to delta_t.
double dloss_d_delta_t(const GradientBuffer& grad, const PosePair& pair,
                       const TimestampParam& tsp);

}  // namespace pvg4d
