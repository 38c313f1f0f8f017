#include "pvg4d/config.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace pvg4d;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text, "exp.yaml");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  const ExperimentConfig c;
  EXPECT_EQ(parse_config(emit_config(c)), c);
}

TEST(Config, RandomDoublesRoundTripBitExactly) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(1e-9, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    ExperimentConfig c;
    c.seed = rng();
    c.scene = "fastmover-6:3";
    c.arm = Arm::Jto;
    c.arms = {Arm::Full, Arm::Baseline};
    c.resolution_factors = {8, 4};
    c.holdout_fraction = u(rng);
    c.init.mover_lifespan = u(rng);
    c.init.velocity_from_flow = false;
    c.train.lr.velocity = u(rng);
    c.train.lr.position_final = u(rng) * 1e-7;
    c.train.distill.omega_tv = u(rng);
    c.train.initial_delta_t = -3.0 * u(rng);
    c.train.distill_brackets = {1, 5};
    c.oracle = oracle_preset("clean");
    c.oracle.hidden_s = u(rng);
    c.oracle.color_noise_sigma = u(rng) * 0.1;
    c.oracle.warp_patches.push_back({1, 2, 30, 40, Vec2(u(rng), -u(rng))});
    const ExperimentConfig back = parse_config(emit_config(c));
    EXPECT_EQ(back, c) << emit_config(c);
    EXPECT_EQ(emit_config(back), emit_config(c));
  }
}

TEST(Config, PartialFileOverridesDefaults) {
  const ExperimentConfig c = parse_config(
      "seed: 12\n"
      "train:\n"
      "  iters: 800\n"
      "  resolution_schedule: [8, 4]\n"
      "oracle:\n"
      "  preset: biased\n"
      "  hidden_s: 0.25\n");
  EXPECT_EQ(c.seed, 12u);
  EXPECT_EQ(c.train.total_iters, 800);
  const TrainConfig t = c.train_config(Arm::Pseudo);
  ASSERT_EQ(t.schedule.size(), 2u);
  EXPECT_EQ(t.schedule[1].start_iter, 401);
  EXPECT_EQ(t.seed, 12u);
  EXPECT_TRUE(t.use_pseudo);
  EXPECT_EQ(c.oracle.name, "biased");
  EXPECT_EQ(c.oracle.hidden_s, 0.25);
}

TEST(Config, UnknownKeyReportsFileAndLine) {
  EXPECT_EQ(error_of("seed: 1\nbogus: 2\n"), "exp.yaml:2:1: unknown key 'bogus'");
  EXPECT_EQ(error_of("train:\n  iters: 5\n  iterz: 5\n"), "exp.yaml:3:3: unknown key 'train.iterz'");
}

TEST(Config, BadValueReportsLine) {
  EXPECT_EQ(error_of("out: x\nseed: abc\n"), "exp.yaml:2:7: bad value for 'seed'");
  EXPECT_NE(error_of("arms: [baseline, nope]\n").find("exp.yaml:1:"), std::string::npos);
  EXPECT_NE(error_of("oracle:\n  preset: foggy\n").find("exp.yaml:2:"), std::string::npos);
}

TEST(Config, SyntaxErrorReportsLine) {
  const std::string e = error_of("seed: 1\ntrain: [1, 2\n");
  EXPECT_EQ(e.rfind("exp.yaml:", 0), 0u) << e;
  EXPECT_NE(e, "");
}

TEST(Config, SemanticErrorsAreConfigErrors) {
  EXPECT_NE(error_of("train:\n  resolution_schedule: [3]\n"), "");
  EXPECT_NE(error_of("scene: nowhere\n"), "");
  EXPECT_NE(error_of("oracle:\n  hidden_s: 1.5\n"), "");
}

TEST(Config, MissingFile) { EXPECT_THROW(load_config("/nonexistent/x.yaml"), ConfigError); }

TEST(Config, Lists) {
  EXPECT_EQ(parse_int_list("16,8,4,2"), (std::vector<int>{16, 8, 4, 2}));
  EXPECT_THROW(parse_int_list("16,x"), std::invalid_argument);
  EXPECT_THROW(parse_int_list("4.5"), std::invalid_argument);
  EXPECT_EQ(parse_arm_list("baseline,+JTO+UD"), (std::vector<Arm>{Arm::Baseline, Arm::Full}));
  EXPECT_THROW(parse_arm_list("baseline,bad"), std::invalid_argument);
}

TEST(Config, SceneSelectors) {
  EXPECT_EQ(expand_scene("fastmover-6").size(), 6u);
  EXPECT_EQ(expand_scene("fastmover-6:2"), std::vector<std::string>{"fastmover-6:2"});
  EXPECT_EQ(benchmark_scene("panning").name, "panning");
  EXPECT_THROW(expand_scene("fastmover-7"), std::invalid_argument);
}
