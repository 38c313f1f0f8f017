#pragma once

// Small fixed-size geometry used by the splatting pipeline: quaternions,
// 3D covariance construction, the pinhole camera and the EWA projection of
// a 3D covariance onto the image plane.
//
// Conventions
//   * Poses are camera-to-world. The view rotation W is the transpose of the
//     pose rotation; p_cam = W (p_world - t).
//   * Camera looks down +z, image x to the right, image y down.
//   * Pixel (i, j) has its center at continuous coordinate (i + 0.5, j + 0.5).

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <stdexcept>

namespace pvg4d {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kNearPlane = 1e-4;
inline constexpr double kScreenCovarianceFloor = 0.3;

class DegenerateDepth : public std::runtime_error {
 public:
  explicit DegenerateDepth(double z);
  double depth() const noexcept { return z_; }

 private:
  double z_;
};

/// Hamilton quaternion, scalar first.
struct Quat {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static Quat identity() { return {}; }
  static Quat from_axis_angle(const Vec3& axis, double angle);
  static Quat from_vec(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }

  Vec4 vec() const { return {w, x, y, z}; }
  double norm() const;
  Quat normalized() const;
  Quat conjugate() const { return {w, -x, -y, -z}; }
  Quat operator-() const { return {-w, -x, -y, -z}; }

  friend Quat operator*(const Quat& a, const Quat& b);
  friend bool operator==(const Quat&, const Quat&) = default;
};

double dot(const Quat& a, const Quat& b);

/// Rotation matrix of q / |q|. Sign of q does not matter.
Mat3 to_rotation(const Quat& q);

/// Pulls a gradient w.r.t. to_rotation(q) back onto the raw components of q,
/// including the normalization.
Vec4 to_rotation_backward(const Quat& q, const Mat3& grad_rotation);

/// Rotation angle in [0, pi] of the relative rotation between a and b.
double rotation_angle_between(const Quat& a, const Quat& b);

struct Pose {
  Quat rotation;  // camera-to-world
  Vec3 translation = Vec3::Zero();

  /// World-to-camera rotation W = R^T.
  Mat3 view_rotation() const { return to_rotation(rotation).transpose(); }
  Vec3 world_to_camera(const Vec3& p) const { return view_rotation() * (p - translation); }
  Pose inverse() const;
  friend Pose operator*(const Pose& a, const Pose& b);
};

struct Camera {
  Pose pose;
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  /// Throws std::invalid_argument when the intrinsics break the pinhole
  /// invariants.
  void validate() const;
  /// Intrinsics divided by factor; width and height must be divisible.
  Camera downsampled(int factor) const;
};

/// R diag(exp(log_scale))^2 R^T, symmetric by construction.
Mat3 build_covariance(const Vec3& log_scale, const Quat& q);

/// Jacobian of (fx x/z, fy y/z) at p_cam. Throws DegenerateDepth when
/// p_cam.z() <= near.
Mat23 projection_jacobian(const Camera& cam, const Vec3& p_cam, double near = kNearPlane);

/// Pixel-space projection of a camera-space point (no near check).
Vec2 project(const Camera& cam, const Vec3& p_cam);

/// J W Sigma W^T J^T plus the anti-aliasing floor on the diagonal,
/// symmetrized.
Mat2 project_covariance(const Mat3& sigma, const Mat3& view_rotation, const Mat23& jacobian,
                        double floor = kScreenCovarianceFloor);

template <typename M>
M symmetrized(const M& m) {
  return 0.5 * (m + m.transpose()).eval();
}

inline double sigmoid(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double softplus(double x) {
  return x > 30.0 ? x : std::log1p(std::exp(x));
}

inline double softplus_inverse(double y) {
  return y > 30.0 ? y : std::log(std::expm1(y));
}

}  // namespace pvg4d
