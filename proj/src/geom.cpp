#include "pvg4d/geom.hpp"

#include <cmath>
#include <string>

namespace pvg4d {

DegenerateDepth::DegenerateDepth(double z)
    : std::runtime_error("degenerate depth " + std::to_string(z)), z_(z) {}

Quat Quat::from_axis_angle(const Vec3& axis, double angle) {
  const Vec3 a = axis.normalized();
  const double h = 0.5 * angle;
  const double s = std::sin(h);
  return {std::cos(h), a.x() * s, a.y() * s, a.z() * s};
}

double Quat::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Quat Quat::normalized() const {
  const double n = norm();
  return {w / n, x / n, y / n, z / n};
}

Quat operator*(const Quat& a, const Quat& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

double dot(const Quat& a, const Quat& b) { return a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z; }

namespace {

Mat3 unit_rotation(double w, double x, double y, double z) {
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

}  // namespace

Mat3 to_rotation(const Quat& q) {
  const Quat u = q.normalized();
  return unit_rotation(u.w, u.x, u.y, u.z);
}

Vec4 to_rotation_backward(const Quat& q, const Mat3& g) {
  const double n = q.norm();
  const double w = q.w / n, x = q.x / n, y = q.y / n, z = q.z / n;

  // Gradient w.r.t. the unit quaternion.
  Vec4 gu;
  gu[0] = 2 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
  gu[1] = 2 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2 * x * g(1, 1) - w * g(1, 2) +
               z * g(2, 0) + w * g(2, 1) - 2 * x * g(2, 2));
  gu[2] = 2 * (-2 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) -
               w * g(2, 0) + z * g(2, 1) - 2 * y * g(2, 2));
  gu[3] = 2 * (-2 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2 * z * g(1, 1) +
               y * g(1, 2) + x * g(2, 0) + y * g(2, 1));

  // d(q/|q|)/dq = (I - u u^T) / |q|
  const Vec4 u(w, x, y, z);
  return (gu - u * u.dot(gu)) / n;
}

double rotation_angle_between(const Quat& a, const Quat& b) {
  const double d = std::abs(dot(a.normalized(), b.normalized()));
  return 2.0 * std::acos(std::min(1.0, d));
}

Pose Pose::inverse() const {
  Pose inv;
  inv.rotation = rotation.normalized().conjugate();
  inv.translation = -(to_rotation(inv.rotation) * translation);
  return inv;
}

Pose operator*(const Pose& a, const Pose& b) {
  Pose out;
  out.rotation = (a.rotation * b.rotation).normalized();
  out.translation = to_rotation(a.rotation) * b.translation + a.translation;
  return out;
}

void Camera::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw std::invalid_argument("camera focal lengths must be positive");
  if (width <= 0 || height <= 0) throw std::invalid_argument("camera size must be positive");
  if (!(cx >= 0 && cx < width && cy >= 0 && cy < height))
    throw std::invalid_argument("camera principal point outside the image");
}

Camera Camera::downsampled(int factor) const {
  Camera c = *this;
  const double f = factor;
  c.fx /= f;
  c.fy /= f;
  c.cx /= f;
  c.cy /= f;
  c.width /= factor;
  c.height /= factor;
  return c;
}

Mat3 build_covariance(const Vec3& log_scale, const Quat& q) {
  const Mat3 r = to_rotation(q);
  const Vec3 s2 = (2.0 * log_scale).array().exp();
  return symmetrized(Mat3(r * s2.asDiagonal() * r.transpose()));
}

Mat23 projection_jacobian(const Camera& cam, const Vec3& p, double near) {
  if (!(p.z() > near)) throw DegenerateDepth(p.z());
  const double iz = 1.0 / p.z();
  const double iz2 = iz * iz;
  Mat23 j;
  j << cam.fx * iz, 0.0, -cam.fx * p.x() * iz2,
      0.0, cam.fy * iz, -cam.fy * p.y() * iz2;
  return j;
}

Vec2 project(const Camera& cam, const Vec3& p) {
  return {cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy};
}

Mat2 project_covariance(const Mat3& sigma, const Mat3& w, const Mat23& j, double floor) {
  const Mat23 t = j * w;
  Mat2 cov = t * sigma * t.transpose();
  cov = symmetrized(cov);
  cov(0, 0) += floor;
  cov(1, 1) += floor;
  return cov;
}

}  // namespace pvg4d
