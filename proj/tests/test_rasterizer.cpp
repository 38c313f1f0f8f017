#include "pvg4d/rasterizer.hpp"

#include "pvg4d/parallel.hpp"
#include "support/gradcheck.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace pvg4d;
using namespace pvg4d::fdcheck;

namespace {

PVGaussian isotropic(const Vec3& mu, double scale, double opacity, const Vec3& color) {
  PVGaussian g;
  g.mu = mu;
  g.log_scale = Vec3::Constant(std::log(scale));
  g.opacity_logit = logit(opacity);
  g.color = color;
  g.log_beta = 20;
  return g;
}

}  // namespace

TEST(Render, EmptySceneIsBackground) {
  SceneModel scene;
  scene.background = Vec3(0.2, 0.4, 0.6);
  const RenderOutput out = render(scene, default_camera(16, 8), 0.5);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 16; ++x) {
      for (int c = 0; c < 3; ++c) EXPECT_EQ(out.image.at(x, y, c), scene.background[c]);
      EXPECT_EQ(out.alpha_map.at(x, y), 0.0);
    }
}

TEST(Render, SingleOpaqueSplat) {
  SceneModel scene;
  const Camera cam = default_camera(32, 32);
  // Pixel (16, 16) has its center at (16.5, 16.5); place the splat there.
  const double z = 4.0;
  const Vec3 mu((16.5 - cam.cx) * z / cam.fx, (16.5 - cam.cy) * z / cam.fy, z);
  scene.gaussians.push_back(isotropic(mu, 1e-4, 1.0 - 1e-9, Vec3(0.9, 0.1, 0.3)));
  const RenderOutput out = render(scene, cam, 0.5);
  EXPECT_GE(out.alpha_map.at(16, 16), 0.99);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(out.image.at(16, 16, c), scene.gaussians[0].color[c], 0.01);
  EXPECT_NEAR(out.depth_map.at(16, 16), z, 1e-12);
}

TEST(Render, TwoTermCompositingMatchesClosedForm) {
  SceneModel scene;
  scene.background = Vec3(0.1, 0.2, 0.3);
  const Camera cam = default_camera(32, 32);
  const double s1 = 0.2, z1 = 3.0, o1 = 0.6;
  const double s2 = 0.5, z2 = 5.0, o2 = 0.8;
  const Vec3 c1(1, 0, 0), c2(0, 1, 0.5);
  scene.gaussians.push_back(isotropic(Vec3(0, 0, z2), s2, o2, c2));
  scene.gaussians.push_back(isotropic(Vec3(0, 0, z1), s1, o1, c1));
  const RenderOutput out = render(scene, cam, 0.5);

  // Both centers project to (cx, cy) = (16, 16); screen variance is
  // (f s / z)^2 + floor along both axes.
  auto alpha = [&](double o, double s, double z, int px, int py) {
    const double var = std::pow(cam.fx * s / z, 2) + kScreenCovarianceFloor;
    const double dx = px + 0.5 - cam.cx, dy = py + 0.5 - cam.cy;
    return o * std::exp(-0.5 * (dx * dx + dy * dy) / var);
  };
  for (auto [px, py] : {std::pair{16, 16}, std::pair{18, 15}, std::pair{14, 19}}) {
    const double a1 = alpha(o1, s1, z1, px, py);
    const double a2 = alpha(o2, s2, z2, px, py);
    ASSERT_GT(a1, kMinAlpha);
    ASSERT_GT(a2, kMinAlpha);
    const Vec3 expected = c1 * a1 + c2 * a2 * (1 - a1) + scene.background * (1 - a1) * (1 - a2);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(out.image.at(px, py, c), expected[c], 1e-12);
    EXPECT_NEAR(out.alpha_map.at(px, py), 1 - (1 - a1) * (1 - a2), 1e-12);
    const double expected_depth = (z1 * a1 + z2 * a2 * (1 - a1)) / (1 - (1 - a1) * (1 - a2));
    EXPECT_NEAR(out.depth_map.at(px, py), expected_depth, 1e-12);
  }
}

TEST(Render, AlphaInUnitIntervalAndPermutationInvariant) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    SceneModel scene;
    Camera cam;
    random_scene(rng, 40, scene, cam, 48, 32);
    const RenderOutput a = render(scene, cam, 0.45);
    for (double v : a.alpha_map.data) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    SceneModel shuffled = scene;
    std::shuffle(shuffled.gaussians.begin(), shuffled.gaussians.end(), rng);
    const RenderOutput b = render(shuffled, cam, 0.45);
    for (size_t i = 0; i < a.image.data.size(); ++i)
      EXPECT_NEAR(a.image.data[i], b.image.data[i], 1e-12);
  }
}

TEST(Render, BehindCameraIsCulled) {
  SceneModel scene;
  scene.gaussians.push_back(isotropic(Vec3(0, 0, -2), 0.5, 0.9, Vec3(1, 1, 1)));
  const RenderOutput out = render(scene, default_camera(16, 16), 0.0);
  for (double v : out.alpha_map.data) EXPECT_EQ(v, 0.0);
  const GradientBuffer g =
      render_backward(scene, default_camera(16, 16), 0.0, Image(16, 16, 3, 1.0));
  EXPECT_EQ(g.gaussians[0].mu, Vec3::Zero());
}

TEST(Render, BitIdenticalAcrossThreadCounts) {
  std::mt19937_64 rng(12);
  SceneModel scene;
  Camera cam;
  random_scene(rng, 50, scene, cam, 64, 64);
  const Image w = random_image(64, 64, 3, rng);
  const int saved = thread_cap();
  set_thread_cap(1);
  const RenderOutput a = render(scene, cam, 0.3);
  const GradientBuffer ga = render_backward(scene, cam, 0.3, w);
  set_thread_cap(4);
  const RenderOutput b = render(scene, cam, 0.3);
  const GradientBuffer gb = render_backward(scene, cam, 0.3, w);
  set_thread_cap(saved);
  EXPECT_EQ(a.image, b.image);
  for (size_t i = 0; i < ga.gaussians.size(); ++i)
    for (int k = 0; k < kGaussianParamCount; ++k)
      EXPECT_EQ(gaussian_grad(ga.gaussians[i], k), gaussian_grad(gb.gaussians[i], k));
  EXPECT_EQ(ga.cam_rotation, gb.cam_rotation);
  EXPECT_EQ(ga.time, gb.time);
}

TEST(RenderBackward, ZeroGradientGivesZero) {
  std::mt19937_64 rng(13);
  SceneModel scene;
  Camera cam;
  random_scene(rng, 20, scene, cam, 32, 32);
  const GradientBuffer g = render_backward(scene, cam, 0.5, Image(32, 32, 3, 0.0));
  for (const auto& gg : g.gaussians)
    for (int k = 0; k < kGaussianParamCount; ++k) EXPECT_EQ(gaussian_grad(gg, k), 0.0);
  EXPECT_EQ(g.cam_rotation, Vec4::Zero());
  EXPECT_EQ(g.cam_translation, Vec3::Zero());
  EXPECT_EQ(g.time, 0.0);
}

TEST(RenderBackward, ColorGradientIsAlphaTimesTransmittance) {
  SceneModel scene;
  const Camera cam = default_camera(32, 32);
  scene.gaussians.push_back(isotropic(Vec3(0.05, -0.02, 4.0), 0.3, 0.7, Vec3(0.2, 0.5, 0.9)));
  const auto splats = project_splats(scene, cam, 0.5);
  ASSERT_EQ(splats.size(), 1u);
  const int px = 17, py = 15;
  Image grad(32, 32, 3, 0.0);
  grad.at(px, py, 1) = 1.0;
  const GradientBuffer g = render_backward(scene, cam, 0.5, grad);
  const Splat2D& s = splats[0];
  const Vec2 d(px + 0.5 - s.center.x(), py + 0.5 - s.center.y());
  const double alpha = s.peak_alpha * std::exp(-0.5 * d.dot(s.inv_cov * d));
  EXPECT_NEAR(g.gaussians[0].color[1], alpha * 1.0, 1e-14);  // transmittance 1 for the front splat
  EXPECT_EQ(g.gaussians[0].color[0], 0.0);
}

TEST(RenderBackward, MatchesFiniteDifferencesOnRandomScenes) {
  std::mt19937_64 rng(14);
  const double t = 0.43;
  for (int trial = 0; trial < 3; ++trial) {
    SceneModel scene;
    Camera cam;
    random_scene(rng, 12, scene, cam, 32, 32);
    const Image w = random_image(32, 32, 3, rng);
    const GradientBuffer g = render_backward(scene, cam, t, w);
    for (size_t i = 0; i < scene.gaussians.size(); ++i) {
      for (int k = 0; k < kGaussianParamCount; ++k) {
        auto f = [&](double v) {
          SceneModel s = scene;
          gaussian_param(s.gaussians[i], k) = v;
          return weighted_sum(render(s, cam, t).image, w);
        };
        const double fd = central_difference(f, gaussian_param(scene.gaussians[i], k), 1e-6);
        const double an = gaussian_grad(g.gaussians[i], k);
        EXPECT_TRUE(close_rel(an, fd, 1e-4, 1e-6))
            << "gaussian " << i << " " << kGaussianFieldNames[gaussian_field_of(k)] << " (" << k
            << "): analytic " << an << " fd " << fd;
      }
    }
    for (int k = 0; k < 7; ++k) {
      auto f = [&](double v) {
        Camera c = cam;
        camera_param(c, k) = v;
        return weighted_sum(render(scene, c, t).image, w);
      };
      const double fd = central_difference(f, camera_param(cam, k), 1e-6);
      EXPECT_TRUE(close_rel(camera_grad(g, k), fd, 1e-4, 1e-6))
          << "camera " << k << ": analytic " << camera_grad(g, k) << " fd " << fd;
    }
    auto ft = [&](double v) { return weighted_sum(render(scene, cam, v).image, w); };
    EXPECT_TRUE(close_rel(g.time, central_difference(ft, t, 1e-6), 1e-4, 1e-6));
  }
}

TEST(RenderDownsampled, FactorOneIsIdentity) {
  std::mt19937_64 rng(15);
  SceneModel scene;
  Camera cam;
  random_scene(rng, 20, scene, cam, 32, 32);
  EXPECT_EQ(render_downsampled(scene, cam, 0.5, 1).image, render(scene, cam, 0.5).image);
}

TEST(RenderDownsampled, ShapesAndErrors) {
  SceneModel scene;
  const Camera cam = default_camera(64, 64);
  const RenderOutput out = render_downsampled(scene, cam, 0.5, 16);
  EXPECT_EQ(out.image.width, 4);
  EXPECT_EQ(out.image.height, 4);
  EXPECT_THROW(render_downsampled(scene, default_camera(60, 64), 0.5, 8), ResolutionMismatch);
  EXPECT_THROW(render_downsampled(scene, cam, 0.5, 3), ResolutionMismatch);
}

TEST(RenderDownsampled, CloseToBoxFilteredFullRender) {
  // Smooth scene: large splats, no sub-pixel detail.
  SceneModel scene;
  scene.background = Vec3(0.3, 0.3, 0.3);
  std::mt19937_64 rng(16);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 20; ++i)
    scene.gaussians.push_back(isotropic(Vec3(u(rng) * 3 - 1.5, u(rng) * 3 - 1.5, 4 + u(rng)),
                                        0.35 + 0.2 * u(rng), 0.3 + 0.5 * u(rng),
                                        Vec3(u(rng), u(rng), u(rng))));
  const Camera cam = default_camera(64, 64);
  const Image full = box_downsample(render(scene, cam, 0.5).image, 2);
  const Image half = render_downsampled(scene, cam, 0.5, 2).image;
  double se = 0.0;
  for (size_t i = 0; i < full.data.size(); ++i) se += std::pow(full.data[i] - half.data[i], 2);
  EXPECT_LT(std::sqrt(se / full.data.size()), 0.05);
}
