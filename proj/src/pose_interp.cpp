#include "pvg4d/pose_interp.hpp"

#include <algorithm>
#include <cmath>

namespace pvg4d {

PosePair PosePair::aligned() const {
  PosePair out = *this;
  out.p_start.rotation = p_start.rotation.normalized();
  out.p_end.rotation = p_end.rotation.normalized();
  if (dot(out.p_start.rotation, out.p_end.rotation) < 0.0) out.p_end.rotation = -out.p_end.rotation;
  return out;
}

Quat slerp_exact(const Quat& a, const Quat& b, double s) {
  const double cos_theta = std::clamp(dot(a, b), -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  if (theta < 1e-6) return lerp_quat(a, b, s);
  const double inv_sin = 1.0 / std::sin(theta);
  const double wa = std::sin((1.0 - s) * theta) * inv_sin;
  const double wb = std::sin(s * theta) * inv_sin;
  return Quat::from_vec(wa * a.vec() + wb * b.vec());
}

Quat lerp_quat(const Quat& a, const Quat& b, double s) {
  return Quat::from_vec((1.0 - s) * a.vec() + s * b.vec()).normalized();
}

Vec4 lerp_quat_derivative(const Quat& a, const Quat& b, double s) {
  const Vec4 raw = (1.0 - s) * a.vec() + s * b.vec();
  const double n = raw.norm();
  const Vec4 u = raw / n;
  const Vec4 d_raw = b.vec() - a.vec();
  return (d_raw - u * u.dot(d_raw)) / n;
}

InterpolatedPose interp_pose_at(const PosePair& pair, double s) {
  const PosePair p = pair.aligned();
  InterpolatedPose out;
  out.fraction = s;
  out.pose.rotation = lerp_quat(p.p_start.rotation, p.p_end.rotation, s);
  out.pose.translation = (1.0 - s) * p.p_start.translation + s * p.p_end.translation;
  out.time = (1.0 - s) * p.time_start + s * p.time_end;
  out.d_rotation_ds = lerp_quat_derivative(p.p_start.rotation, p.p_end.rotation, s);
  out.d_translation_ds = p.p_end.translation - p.p_start.translation;
  out.d_time_ds = p.time_end - p.time_start;
  return out;
}

InterpolatedPose interp_pose(const PosePair& pair, const TimestampParam& tsp) {
  return interp_pose_at(pair, tsp.fraction());
}

double dloss_d_delta_t(const GradientBuffer& grad, const PosePair& pair,
                       const TimestampParam& tsp) {
  const InterpolatedPose ip = interp_pose(pair, tsp);
  const double d_s = grad.cam_rotation.dot(ip.d_rotation_ds) +
                     grad.cam_translation.dot(ip.d_translation_ds) + grad.time * ip.d_time_ds;
  const double s = ip.fraction;
  return d_s * s * (1.0 - s);
}

}  // namespace pvg4d
