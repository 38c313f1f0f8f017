#include "pvg4d/pose_interp.hpp"

#include "support/gradcheck.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace pvg4d;
using namespace pvg4d::fdcheck;

namespace {

double max_component_gap(const Quat& a, const Quat& b) {
  return (a.vec() - b.vec()).cwiseAbs().maxCoeff();
}

Quat random_pair_end(const Quat& a, double angle, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const Vec3 axis(n(rng), n(rng), n(rng));
  return (a * Quat::from_axis_angle(axis, angle)).normalized();
}

PosePair random_pair(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PosePair pair;
  pair.p_start.rotation = Quat::from_axis_angle(Vec3(u(rng), u(rng), u(rng)), 0.1);
  pair.p_end.rotation = random_pair_end(pair.p_start.rotation, 0.08, rng);
  pair.p_start.translation = Vec3(0.1 * u(rng), 0.1 * u(rng), 0.1 * u(rng));
  pair.p_end.translation = pair.p_start.translation + Vec3(0.3 * u(rng), 0.1 * u(rng), 0.2 * u(rng));
  pair.time_start = 0.4;
  pair.time_end = 0.45;
  return pair;
}

}  // namespace

TEST(Slerp, Endpoints) {
  std::mt19937_64 rng(3);
  const Quat a = random_unit_quat(rng);
  const Quat b = random_pair_end(a, 0.7, rng);
  EXPECT_LT(max_component_gap(slerp_exact(a, b, 0.0), a), 1e-12);
  EXPECT_LT(max_component_gap(slerp_exact(a, b, 1.0), b), 1e-12);
}

TEST(Slerp, HalfwayAboutZ) {
  const Quat a = Quat::identity();
  const Quat b = Quat::from_axis_angle(Vec3::UnitZ(), kPi / 2);
  const Quat expect = Quat::from_axis_angle(Vec3::UnitZ(), kPi / 4);
  EXPECT_LT(max_component_gap(slerp_exact(a, b, 0.5), expect), 1e-12);
}

TEST(Slerp, OnGreatArcByAngleAdditivity) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Quat a = random_unit_quat(rng);
    const double theta = 0.3 * std::uniform_real_distribution<double>(0.01, 1.0)(rng);
    const Quat b = random_pair_end(a, theta, rng);
    for (double s : {0.1, 0.37, 0.5, 0.9}) {
      const Quat q = slerp_exact(a, b, s);
      EXPECT_NEAR(q.norm(), 1.0, 1e-12);
      const double ang_a = rotation_angle_between(a, q);
      const double ang_b = rotation_angle_between(q, b);
      EXPECT_NEAR(ang_a + ang_b, theta, 1e-9);
      EXPECT_NEAR(ang_a, s * theta, 1e-9);
    }
  }
}

TEST(Slerp, DegenerateAngleFallsBack) {
  const Quat a = Quat::from_axis_angle(Vec3::UnitX(), 0.3);
  const Quat q = slerp_exact(a, a, 0.4);
  EXPECT_LT(max_component_gap(q, a), 1e-15);
}

TEST(Lerp, IdenticalEndpoints) {
  const Quat a = Quat::from_axis_angle(Vec3(1, 2, 3), 0.4);
  EXPECT_LT(max_component_gap(lerp_quat(a, a, 0.5), a), 1e-15);
}

TEST(Lerp, MatchesSlerpForSmallAngles) {
  std::mt19937_64 rng(11);
  for (double deg : {1.0, 2.0}) {
    for (int trial = 0; trial < 20; ++trial) {
      const Quat a = random_unit_quat(rng);
      const Quat b = random_pair_end(a, deg * kPi / 180.0, rng);
      for (int i = 0; i <= 10; ++i) {
        const double s = 0.1 * i;
        EXPECT_LT(max_component_gap(lerp_quat(a, b, s), slerp_exact(a, b, s)), 1e-5)
            << deg << " deg, s=" << s;
      }
    }
  }
}

TEST(Lerp, LargeAngleDeviationIsVisible) {
  const Quat a = Quat::identity();
  const Quat b = Quat::from_axis_angle(Vec3::UnitY(), kPi / 3);
  // Symmetric midpoint coincides; off-center points drift.
  EXPECT_LT(max_component_gap(lerp_quat(a, b, 0.5), slerp_exact(a, b, 0.5)), 1e-12);
  EXPECT_GT(max_component_gap(lerp_quat(a, b, 0.25), slerp_exact(a, b, 0.25)), 1e-3);
}

TEST(Lerp, DerivativeMatchesFiniteDifference) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const Quat a = random_unit_quat(rng);
    const Quat b = random_pair_end(a, 1.2, rng);
    const double s = std::uniform_real_distribution<double>(0.05, 0.95)(rng);
    const Vec4 d = lerp_quat_derivative(a, b, s);
    for (int k = 0; k < 4; ++k) {
      const double fd = central_difference(
          [&](double x) { return lerp_quat(a, b, x).vec()[k]; }, s, 1e-6);
      EXPECT_TRUE(close_rel(d[k], fd, 1e-6, 1e-9)) << d[k] << " vs " << fd;
    }
  }
}

TEST(InterpPose, ZeroBiasIsMidpoint) {
  std::mt19937_64 rng(17);
  const PosePair pair = random_pair(rng);
  const InterpolatedPose ip = interp_pose(pair, TimestampParam{3, 0.0});
  EXPECT_EQ(ip.fraction, 0.5);
  EXPECT_LT((ip.pose.translation - 0.5 * (pair.p_start.translation + pair.p_end.translation)).norm(),
            1e-15);
  EXPECT_NEAR(ip.time, 0.425, 1e-15);
}

TEST(InterpPose, SaturatedBiasReachesStart) {
  std::mt19937_64 rng(19);
  const PosePair pair = random_pair(rng);
  const InterpolatedPose ip = interp_pose(pair, TimestampParam{0, -30.0});
  EXPECT_LT((ip.pose.translation - pair.p_start.translation).norm(), 1e-9);
  EXPECT_LT(max_component_gap(ip.pose.rotation, pair.p_start.rotation.normalized()), 1e-9);
}

TEST(InterpPose, IdenticalEndpoints) {
  PosePair pair;
  pair.p_start.rotation = pair.p_end.rotation = Quat::from_axis_angle(Vec3(0, 1, 0), 0.2);
  pair.p_start.translation = pair.p_end.translation = Vec3(1, 2, 3);
  for (double dt : {-3.0, 0.0, 0.7, 5.0}) {
    const InterpolatedPose ip = interp_pose(pair, TimestampParam{0, dt});
    EXPECT_EQ(ip.pose.translation, pair.p_start.translation);
    EXPECT_LT(max_component_gap(ip.pose.rotation, pair.p_start.rotation), 1e-15);
  }
}

TEST(InterpPose, HemisphereAlignment) {
  PosePair pair;
  pair.p_start.rotation = Quat::from_axis_angle(Vec3::UnitZ(), 0.1);
  pair.p_end.rotation = -Quat::from_axis_angle(Vec3::UnitZ(), 0.2);
  const InterpolatedPose ip = interp_pose(pair, TimestampParam{0, 0.0});
  EXPECT_NEAR(rotation_angle_between(ip.pose.rotation, Quat::from_axis_angle(Vec3::UnitZ(), 0.15)),
              0.0, 1e-6);
}

TEST(InterpPose, MidIndexStrictlyInsideBracket) {
  for (double dt = -40.0; dt <= 40.0; dt += 0.5) {
    const TimestampParam tsp{7, dt};
    // Saturates to the closed bracket only in floating point at |dt| > 36.
    EXPECT_GE(tsp.mid_index(), 7.0);
    EXPECT_LE(tsp.mid_index(), 8.0);
    if (std::abs(dt) < 30) {
      EXPECT_GT(tsp.mid_index(), 7.0);
      EXPECT_LT(tsp.mid_index(), 8.0);
    }
  }
}

TEST(InterpPose, TranslationLinearInFraction) {
  std::mt19937_64 rng(23);
  const PosePair pair = random_pair(rng);
  const Vec3 a = interp_pose_at(pair, 0.2).pose.translation;
  const Vec3 b = interp_pose_at(pair, 0.6).pose.translation;
  const Vec3 c = interp_pose_at(pair, 0.4).pose.translation;
  EXPECT_LT((c - 0.5 * (a + b)).norm(), 1e-15);
}

TEST(DeltaTGrad, ZeroPoseGradient) {
  std::mt19937_64 rng(29);
  const PosePair pair = random_pair(rng);
  GradientBuffer g(0);
  EXPECT_EQ(dloss_d_delta_t(g, pair, TimestampParam{0, 0.3}), 0.0);
}

TEST(DeltaTGrad, Saturation) {
  std::mt19937_64 rng(31);
  const PosePair pair = random_pair(rng);
  GradientBuffer g(0);
  g.cam_rotation = Vec4(1, -2, 3, 0.5);
  g.cam_translation = Vec3(4, 5, -6);
  g.time = 2.0;
  EXPECT_LT(std::abs(dloss_d_delta_t(g, pair, TimestampParam{0, 30.0})), 1e-11);
  EXPECT_LT(std::abs(dloss_d_delta_t(g, pair, TimestampParam{0, -30.0})), 1e-11);
}

TEST(DeltaTGrad, MatchesFiniteDifferenceThroughRender) {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 5; ++trial) {
    SceneModel scene;
    Camera cam;
    random_scene(rng, 20, scene, cam, 48, 48);
    PosePair pair = random_pair(rng);
    pair.p_start = cam.pose * pair.p_start;
    pair.p_end = cam.pose * pair.p_end;
    const Image weights = random_image(48, 48, 3, rng);
    const double dt0 = std::uniform_real_distribution<double>(-1.5, 1.5)(rng);

    auto loss = [&](double dt) {
      const InterpolatedPose ip = interp_pose(pair, TimestampParam{0, dt});
      Camera c = cam;
      c.pose = ip.pose;
      return weighted_sum(render(scene, c, ip.time).image, weights);
    };
    const InterpolatedPose ip = interp_pose(pair, TimestampParam{0, dt0});
    Camera c = cam;
    c.pose = ip.pose;
    const GradientBuffer g = render_backward(scene, c, ip.time, weights);
    const double analytic = dloss_d_delta_t(g, pair, TimestampParam{0, dt0});
    const double fd = central_difference(loss, dt0, 1e-6);
    EXPECT_TRUE(close_rel(analytic, fd, 1e-3, 1e-7)) << analytic << " vs " << fd;
  }
}
