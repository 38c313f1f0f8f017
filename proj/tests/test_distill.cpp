#include "pvg4d/distill.hpp"

#include "support/gradcheck.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace pvg4d;
using namespace pvg4d::fdcheck;

namespace {

UncertaintyMap map_from_exposed(const Image& values) {
  UncertaintyMap m(values.width, values.height, 1.0);
  for (size_t i = 0; i < values.data.size(); ++i)
    m.raw.data[i] = values.data[i] <= 0 ? -60.0 : softplus_inverse(values.data[i]);
  return m;
}

UncertaintyMap random_map(int w, int h, std::mt19937_64& rng) {
  UncertaintyMap m(w, h, 1.0);
  std::uniform_real_distribution<double> u(-2.0, 1.5);
  for (double& v : m.raw.data) v = u(rng);
  return m;
}

}  // namespace

TEST(ConfidenceLoss, ZeroResidual) {
  std::mt19937_64 rng(1);
  const Image img = random_image(6, 5, 3, rng, 0.0, 1.0);
  const UncertaintyMap m = random_map(6, 5, rng);
  const CaResult r = l_ca(img, img, m, DistillWeights{});
  double mean_sq = 0.0;
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 6; ++x) mean_sq += m.beta(x, y) * m.beta(x, y);
  mean_sq /= 30.0;
  EXPECT_NEAR(r.loss, -mean_sq, 1e-14);
  EXPECT_LE(r.loss, 0.0);
  for (double g : r.grad_image.data) EXPECT_EQ(g, 0.0);
}

TEST(ConfidenceLoss, ZeroBetaGivesNoSceneGradient) {
  std::mt19937_64 rng(2);
  const Image a = random_image(4, 4, 3, rng, 0.0, 1.0);
  const Image b = random_image(4, 4, 3, rng, 0.0, 1.0);
  const UncertaintyMap m = map_from_exposed(Image(4, 4, 1, 0.0));
  const CaResult r = l_ca(a, b, m, DistillWeights{});
  EXPECT_NEAR(r.loss, 0.0, 1e-20);
  for (double g : r.grad_image.data) EXPECT_NEAR(g, 0.0, 1e-20);
}

TEST(ConfidenceLoss, SinglePixelHandValue) {
  Image render(1, 1, 3, 0.0), pseudo(1, 1, 3, 0.0);
  render.at(0, 0, 0) = 0.5;
  render.at(0, 0, 1) = 0.5;  // 0.25 + 0.25 = 0.5
  const UncertaintyMap m = map_from_exposed(Image(1, 1, 1, 0.1));
  EXPECT_NEAR(l_ca(render, pseudo, m, DistillWeights{}).loss, 0.04, 1e-12);
}

TEST(ConfidenceLoss, ShapeMismatchThrows) {
  const UncertaintyMap m(4, 4, 1.0);
  EXPECT_THROW(l_ca(Image(4, 4, 3), Image(4, 2, 3), m, DistillWeights{}), ResolutionMismatch);
  EXPECT_THROW(l_ca(Image(4, 2, 3), Image(4, 2, 3), m, DistillWeights{}), ResolutionMismatch);
}

TEST(ConfidenceLoss, GradientsMatchFiniteDifference) {
  std::mt19937_64 rng(3);
  const Image a = random_image(5, 4, 3, rng, 0.0, 1.0);
  const Image b = random_image(5, 4, 3, rng, 0.0, 1.0);
  UncertaintyMap m = random_map(5, 4, rng);
  const DistillWeights w{1.3, 0.7, 0.0};
  const CaResult r = l_ca(a, b, m, w);
  for (size_t i = 0; i < a.data.size(); ++i) {
    Image x = a;
    const double fd = central_difference(
        [&](double v) { x.data[i] = v; return l_ca(x, b, m, w).loss; }, a.data[i], 1e-6);
    EXPECT_TRUE(close_rel(r.grad_image.data[i], fd, 1e-6, 1e-10));
  }
  for (size_t i = 0; i < m.raw.data.size(); ++i) {
    UncertaintyMap mm = m;
    const double fd = central_difference(
        [&](double v) { mm.raw.data[i] = v; return l_ca(a, b, mm, w).loss; }, m.raw.data[i], 1e-6);
    EXPECT_TRUE(close_rel(r.grad_raw.data[i], fd, 1e-6, 1e-10));
  }
}

TEST(ConfidenceLoss, SceneGradientScalesWithBeta) {
  std::mt19937_64 rng(4);
  const Image a = random_image(3, 3, 3, rng, 0.0, 1.0);
  const Image b = random_image(3, 3, 3, rng, 0.0, 1.0);
  const CaResult r1 = l_ca(a, b, map_from_exposed(Image(3, 3, 1, 0.2)), DistillWeights{});
  const CaResult r3 = l_ca(a, b, map_from_exposed(Image(3, 3, 1, 0.6)), DistillWeights{});
  for (size_t i = 0; i < a.data.size(); ++i)
    EXPECT_NEAR(r3.grad_image.data[i], 3.0 * r1.grad_image.data[i], 1e-12);
}

TEST(BetaOpt, HandValues) {
  Image r(2, 1, 3, 0.0), p(2, 1, 3, 0.0);
  r.at(1, 0, 2) = 1.0;
  const Image b = beta_opt(r, p, 1.0);
  EXPECT_EQ(b.at(0, 0), 0.0);
  EXPECT_EQ(b.at(1, 0), 0.5);
}

TEST(BetaOpt, AscentConvergesToClosedForm) {
  std::mt19937_64 rng(5);
  const Image a = random_image(8, 6, 3, rng, 0.0, 1.0);
  const Image b = random_image(8, 6, 3, rng, 0.0, 1.0);
  const DistillWeights w{1.0, 1.0, 0.0};
  UncertaintyMap m(8, 6, 1.0);
  const double n = 48.0;
  for (int it = 0; it < 5000; ++it) {
    const CaResult r = l_ca(a, b, m, w);
    for (size_t i = 0; i < m.raw.data.size(); ++i) m.raw.data[i] += 2.0 * n * r.grad_raw.data[i];
  }
  const Image target = beta_opt(a, b, w.lambda_f);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 8; ++x) EXPECT_NEAR(m.beta(x, y), target.at(x, y), 1e-3);
}

TEST(BetaOpt, ClosedFormIsTheMaximum) {
  std::mt19937_64 rng(6);
  const Image a = random_image(1, 1, 3, rng, 0.0, 1.0);
  const Image b = random_image(1, 1, 3, rng, 0.0, 1.0);
  const double star = beta_opt(a, b, 1.0).at(0, 0);
  const double best = l_ca(a, b, map_from_exposed(Image(1, 1, 1, star)), DistillWeights{}).loss;
  for (double d : {-0.05, -0.01, 0.01, 0.05}) {
    const double v = std::max(star + d, 1e-9);
    EXPECT_LT(l_ca(a, b, map_from_exposed(Image(1, 1, 1, v)), DistillWeights{}).loss, best);
  }
}

TEST(TotalVariation, ConstantIsZero) {
  const UncertaintyMap m = map_from_exposed(Image(5, 5, 1, 0.3));
  EXPECT_EQ(l_tv(m, 0.001).loss, 0.0);
}

TEST(TotalVariation, TwoPixelHandValue) {
  Image v(2, 1, 1, 0.0);
  v.at(1, 0) = 1.0;
  EXPECT_NEAR(l_tv(map_from_exposed(v), 0.001).loss, 0.001 / 2.0, 1e-15);
}

TEST(TotalVariation, CheckerboardExceedsConstant) {
  Image checker(6, 6, 1), flat(6, 6, 1, 0.5);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) checker.at(x, y) = ((x + y) % 2) ? 0.8 : 0.2;
  EXPECT_GT(l_tv(map_from_exposed(checker), 1.0).loss, l_tv(map_from_exposed(flat), 1.0).loss);
}

TEST(TotalVariation, Seminorm) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Image va = random_image(5, 4, 1, rng, 0.0, 1.0);
    const Image vb = random_image(5, 4, 1, rng, 0.0, 1.0);
    Image vs(5, 4, 1);
    for (size_t i = 0; i < vs.data.size(); ++i) vs.data[i] = va.data[i] + vb.data[i];
    const double ta = l_tv(map_from_exposed(va), 1.0).loss;
    const double tb = l_tv(map_from_exposed(vb), 1.0).loss;
    EXPECT_LE(l_tv(map_from_exposed(vs), 1.0).loss, ta + tb + 1e-12);
    EXPECT_GT(ta, 0.0);
  }
}

TEST(TotalVariation, GradientMatchesFiniteDifference) {
  std::mt19937_64 rng(8);
  const UncertaintyMap m = random_map(5, 4, rng);
  const TvResult r = l_tv(m, 0.01);
  for (size_t i = 0; i < m.raw.data.size(); ++i) {
    UncertaintyMap mm = m;
    const double fd = central_difference(
        [&](double v) { mm.raw.data[i] = v; return l_tv(mm, 0.01).loss; }, m.raw.data[i], 1e-7);
    EXPECT_TRUE(close_rel(r.grad_raw.data[i], fd, 1e-5, 1e-12));
  }
}

TEST(UncertaintyMapTest, ExposedIsNonNegativeAndClamped) {
  UncertaintyMap m(3, 1, 1.0);
  m.raw.data = {-100.0, 0.0, 5000.0};
  EXPECT_GE(m.beta(0, 0), 0.0);
  EXPECT_NEAR(m.beta(1, 0), std::log(2.0), 1e-15);
  EXPECT_EQ(m.beta(2, 0), kMaxUncertainty);
  EXPECT_EQ(m.dbeta_draw(2, 0), 0.0);
}

namespace {

struct DistillFixture {
  SceneModel scene;
  Camera cam;
  PosePair pair;
};

DistillFixture make_fixture(std::mt19937_64& rng) {
  DistillFixture f;
  random_scene(rng, 25, f.scene, f.cam, 32, 32);
  f.pair.p_start = f.cam.pose;
  f.pair.p_end = f.cam.pose * Pose{Quat::from_axis_angle(Vec3::UnitY(), 0.05), Vec3(0.2, 0.0, 0.05)};
  f.pair.time_start = 0.4;
  f.pair.time_end = 0.5;
  return f;
}

}  // namespace

TEST(DistillStep, ZeroResidualGivesNoSceneGradient) {
  std::mt19937_64 rng(9);
  const DistillFixture f = make_fixture(rng);
  const TimestampParam tsp{0, 0.4};
  PseudoFrame pseudo;
  Camera c = f.cam;
  const InterpolatedPose ip = interp_pose(f.pair, tsp);
  c.pose = ip.pose;
  pseudo.image = render_downsampled(f.scene, c, ip.time, 2).image;
  const UncertaintyMap m(16, 16, 0.7);
  const DistillResult r = distill_step(f.scene, f.cam, f.pair, tsp, pseudo, m, DistillWeights{});
  for (const auto& g : r.scene_grad.gaussians) {
    EXPECT_EQ(g.mu.norm(), 0.0);
    EXPECT_EQ(g.color.norm(), 0.0);
  }
  EXPECT_EQ(r.grad_delta_t, 0.0);
  EXPECT_NEAR(r.loss_ca, -0.49, 1e-12);
}

TEST(DistillStep, DeltaTGradientMatchesFiniteDifference) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 4; ++trial) {
    const DistillFixture f = make_fixture(rng);
    PseudoFrame pseudo;
    pseudo.image = random_image(16, 16, 3, rng, 0.0, 1.0);
    const UncertaintyMap m = random_map(16, 16, rng);
    const double dt0 = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    const DistillWeights w{};
    const DistillResult r = distill_step(f.scene, f.cam, f.pair, {0, dt0}, pseudo, m, w);
    const double fd = central_difference(
        [&](double dt) { return distill_step(f.scene, f.cam, f.pair, {0, dt}, pseudo, m, w).loss_ca; },
        dt0, 1e-6);
    EXPECT_TRUE(close_rel(r.grad_delta_t, fd, 1e-3, 1e-9)) << r.grad_delta_t << " vs " << fd;
  }
}

TEST(DistillStep, FrozenUnitBetaIsPlainSquaredError) {
  std::mt19937_64 rng(11);
  const DistillFixture f = make_fixture(rng);
  PseudoFrame pseudo;
  pseudo.image = random_image(16, 16, 3, rng, 0.0, 1.0);
  const UncertaintyMap m = random_map(16, 16, rng);
  const DistillResult r =
      distill_step(f.scene, f.cam, f.pair, {0, 0.0}, pseudo, m, DistillWeights{}, {false, true});
  const Image e = residual_energy(r.render.image, pseudo.image);
  double mse = 0.0;
  for (double v : e.data) mse += v;
  mse /= static_cast<double>(e.pixel_count());
  EXPECT_NEAR(r.loss_ca, mse - 1.0, 1e-12);
  EXPECT_EQ(r.loss_tv, 0.0);
  for (double g : r.umap_update_grad.data) EXPECT_EQ(g, 0.0);
}

TEST(DistillStep, RejectsIndivisiblePseudoResolution) {
  std::mt19937_64 rng(12);
  const DistillFixture f = make_fixture(rng);
  PseudoFrame pseudo;
  pseudo.image = Image(10, 10, 3);
  EXPECT_THROW(distill_step(f.scene, f.cam, f.pair, {0, 0.0}, pseudo, UncertaintyMap(10, 10, 1.0),
                            DistillWeights{}),
               ResolutionMismatch);
}
