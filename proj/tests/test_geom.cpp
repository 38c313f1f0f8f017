#include "pvg4d/geom.hpp"

#include "support/gradcheck.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <random>

using namespace pvg4d;
using pvg4d::fdcheck::random_unit_quat;

TEST(Quat, NormalizeGivesUnitNorm) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 10.0);
  for (int i = 0; i < 100; ++i) {
    const Quat q{n(rng), n(rng), n(rng), n(rng)};
    EXPECT_NEAR(q.normalized().norm(), 1.0, 1e-9);
  }
}

TEST(Quat, RotationIgnoresSign) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    const Quat q = random_unit_quat(rng);
    EXPECT_EQ(to_rotation(q), to_rotation(-q));
  }
}

TEST(Quat, RotationBackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Quat q{u(rng), u(rng), u(rng), u(rng)};
    Mat3 g;
    for (int i = 0; i < 9; ++i) g.data()[i] = u(rng);
    const Vec4 analytic = to_rotation_backward(q, g);
    for (int k = 0; k < 4; ++k) {
      auto f = [&](double v) {
        Quat p = q;
        (&p.w)[k] = v;
        return (to_rotation(p).array() * g.array()).sum();
      };
      const double fd = fdcheck::central_difference(f, (&q.w)[k], 1e-6);
      EXPECT_TRUE(fdcheck::close_rel(analytic[k], fd, 1e-6, 1e-9)) << analytic[k] << " vs " << fd;
    }
  }
}

TEST(Pose, ComposeWithInverseIsIdentity) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 50; ++i) {
    Pose p{random_unit_quat(rng), Vec3(u(rng), u(rng), u(rng))};
    const Pose id = p * p.inverse();
    EXPECT_LT((to_rotation(id.rotation) - Mat3::Identity()).norm(), 1e-9);
    EXPECT_LT(id.translation.norm(), 1e-9);
    const Vec3 x(u(rng), u(rng), u(rng));
    // world_to_camera is the inverse rigid transform
    const Vec3 back = to_rotation(p.rotation) * p.world_to_camera(x) + p.translation;
    EXPECT_LT((back - x).norm(), 1e-9);
  }
}

TEST(BuildCovariance, IdentityCase) {
  EXPECT_LT((build_covariance(Vec3::Zero(), Quat::identity()) - Mat3::Identity()).norm(), 1e-15);
}

TEST(BuildCovariance, AxisAlignedScaling) {
  const Mat3 s = build_covariance(Vec3(std::log(2.0), 0, 0), Quat::identity());
  EXPECT_LT((s - Vec3(4, 1, 1).asDiagonal().toDenseMatrix()).norm(), 1e-12);
}

TEST(BuildCovariance, EigenvaluesAreSquaredScales) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const Vec3 s(u(rng), u(rng), u(rng));
    const Quat q = random_unit_quat(rng);
    const Mat3 sigma = build_covariance(s, q);
    EXPECT_EQ(sigma, sigma.transpose());
    Eigen::SelfAdjointEigenSolver<Mat3> eig(sigma);
    std::array<double, 3> expected{std::exp(2 * s[0]), std::exp(2 * s[1]), std::exp(2 * s[2])};
    std::sort(expected.begin(), expected.end());
    for (int k = 0; k < 3; ++k)
      EXPECT_NEAR(eig.eigenvalues()[k], expected[k], 1e-12 * (1 + expected[k]));
  }
}

TEST(BuildCovariance, RotationEquivariant) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const Vec3 s(u(rng), u(rng), u(rng));
    const Quat q1 = random_unit_quat(rng), q2 = random_unit_quat(rng);
    const Mat3 r2 = to_rotation(q2);
    const Mat3 lhs = build_covariance(s, q2 * q1);
    const Mat3 rhs = r2 * build_covariance(s, q1) * r2.transpose();
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(ProjectionJacobian, UnitDepthOnAxis) {
  Camera cam = fdcheck::default_camera();
  cam.fx = cam.fy = 1.0;
  Mat23 expected;
  expected << 1, 0, 0, 0, 1, 0;
  EXPECT_EQ(projection_jacobian(cam, Vec3(0, 0, 1)), expected);
}

TEST(ProjectionJacobian, DepthScaling) {
  Camera cam = fdcheck::default_camera();
  cam.fx = cam.fy = 100.0;
  Mat23 expected;
  expected << 50, 0, 0, 0, 50, 0;
  EXPECT_EQ(projection_jacobian(cam, Vec3(0, 0, 2)), expected);
}

TEST(ProjectionJacobian, DegenerateDepthThrows) {
  const Camera cam = fdcheck::default_camera();
  EXPECT_THROW(projection_jacobian(cam, Vec3(0, 0, 1e-5)), DegenerateDepth);
  EXPECT_THROW(projection_jacobian(cam, Vec3(0, 0, -1)), DegenerateDepth);
}

TEST(ProjectionJacobian, MatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> depth(std::log(0.1), std::log(100.0));
  const Camera cam = fdcheck::default_camera();
  for (int i = 0; i < 200; ++i) {
    const double z = std::exp(depth(rng));
    const Vec3 p(u(rng) * z, u(rng) * z, z);
    const Mat23 j = projection_jacobian(cam, p);
    for (int c = 0; c < 3; ++c) {
      const double h = 1e-6 * std::max(1.0, std::abs(p[c]));
      Vec3 a = p, b = p;
      a[c] += h;
      b[c] -= h;
      const Vec2 fd = (project(cam, a) - project(cam, b)) / (2 * h);
      for (int r = 0; r < 2; ++r)
        EXPECT_TRUE(fdcheck::close_rel(j(r, c), fd[r], 1e-5, 1e-9 * cam.fx))
            << j(r, c) << " vs " << fd[r] << " at z=" << z;
    }
  }
}

TEST(ProjectCovariance, IdentityChainAddsFloor) {
  Mat23 j;
  j << 1, 0, 0, 0, 1, 0;
  const Mat2 cov = project_covariance(Mat3::Identity(), Mat3::Identity(), j);
  EXPECT_LT((cov - (1.0 + kScreenCovarianceFloor) * Mat2::Identity()).norm(), 1e-15);
  const Mat2 cov2 =
      project_covariance(Vec3(4, 1, 1).asDiagonal().toDenseMatrix(), Mat3::Identity(), j);
  EXPECT_NEAR(cov2(0, 0), 4.3, 1e-15);
  EXPECT_NEAR(cov2(1, 1), 1.3, 1e-15);
  EXPECT_EQ(cov2(0, 1), 0.0);
}

TEST(ProjectCovariance, SymmetricPsdAgainstDenseProduct) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const Mat3 sigma = build_covariance(Vec3(u(rng), u(rng), u(rng)), random_unit_quat(rng));
    const Mat3 w = to_rotation(random_unit_quat(rng));
    Mat23 j;
    for (int k = 0; k < 6; ++k) j.data()[k] = 5 * u(rng);
    const Mat2 cov = project_covariance(sigma, w, j);
    EXPECT_EQ(cov(0, 1), cov(1, 0));
    // Brute-force triple loop product as the oracle.
    Mat2 ref = Mat2::Zero();
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int p = 0; p < 3; ++p)
          for (int q = 0; q < 3; ++q)
            for (int r = 0; r < 3; ++r)
              for (int s = 0; s < 3; ++s)
                ref(a, b) += j(a, p) * w(p, q) * sigma(q, r) * w(s, r) * j(b, s);
    ref(0, 0) += kScreenCovarianceFloor;
    ref(1, 1) += kScreenCovarianceFloor;
    EXPECT_LT((cov - ref).cwiseAbs().maxCoeff(), 1e-10 * (1 + ref.norm()));
    Eigen::SelfAdjointEigenSolver<Mat2> eig(cov);
    EXPECT_GE(eig.eigenvalues().minCoeff(), kScreenCovarianceFloor - 1e-9);
  }
}

TEST(Camera, ValidateRejectsBadIntrinsics) {
  Camera cam = fdcheck::default_camera();
  EXPECT_NO_THROW(cam.validate());
  cam.fx = 0;
  EXPECT_THROW(cam.validate(), std::invalid_argument);
  cam = fdcheck::default_camera();
  cam.cx = cam.width;
  EXPECT_THROW(cam.validate(), std::invalid_argument);
}
