#include "pvg4d/analysis.hpp"

#include "pvg4d/oracle.hpp"
#include "pvg4d/rasterizer.hpp"

#include <gtest/gtest.h>

using namespace pvg4d;

namespace {

struct World {
  SynthScene scene;
  Capture capture;
};

const World& world() {
  static const World w = [] {
    const BenchmarkScene b = fastmover6()[4];
    World out;
    out.scene = make_scene(b.spec);
    out.capture = make_capture(out.scene, b.path, b.n_frames, 0.25);
    return out;
  }();
  return w;
}

}  // namespace

TEST(FlowError, GroundTruthModelHasNoError) {
  const World& w = world();
  const auto rows = object_mid_errors(w.scene, w.capture, w.scene.model, "s");
  ASSERT_EQ(rows.size(), 2u);
  for (const ObjectError& r : rows) {
    EXPECT_EQ(r.scene, "s");
    EXPECT_GT(r.flow_px, 0.0);
    EXPECT_NEAR(r.mid_error, 0.0, 1e-20);
  }
  EXPECT_LT(rows[0].flow_px, rows[1].flow_px);
}

TEST(FlowError, MissingMoverShowsUpOnlyOnThatObject) {
  const World& w = world();
  SceneModel without = w.scene.model;
  without.gaussians.clear();
  for (size_t i = 0; i < w.scene.model.gaussians.size(); ++i)
    if (w.scene.object_of[i] != 1) without.gaussians.push_back(w.scene.model.gaussians[i]);
  const auto rows = object_mid_errors(w.scene, w.capture, without, "s");
  EXPECT_GT(rows[1].mid_error, 1e-3);
  EXPECT_LT(rows[0].mid_error, 0.1 * rows[1].mid_error);
}

TEST(FlowError, TopQuartile) {
  std::vector<ObjectError> rows;
  for (int i = 0; i < 12; ++i) rows.push_back({"s", i, static_cast<double>((i * 5) % 12), 1.0 * i});
  const auto top = top_quartile_by_flow(rows);
  ASSERT_EQ(top.size(), 3u);
  for (size_t i : top) EXPECT_GE(rows[i].flow_px, 9.0);
  EXPECT_EQ(top_quartile_by_flow({rows[0]}).size(), 1u);
  EXPECT_EQ(mean_error(rows, {1, 3}), 2.0);
}

TEST(FlowError, SummaryCorrelation) {
  std::vector<ObjectError> rows;
  for (int i = 0; i < 8; ++i) rows.push_back({"s", i, 2.0 * i, 0.5 + 3.0 * i});
  const FlowErrorSummary s = summarize_flow_error(rows);
  EXPECT_NEAR(s.pearson_r, 1.0, 1e-12);
  EXPECT_NEAR(s.top_quartile_error, 0.5 + 3.0 * 6.5, 1e-12);
}

TEST(Localization, SeparatesCorruptedMoversFromBackground) {
  const World& w = world();
  const Oracle o(w.scene, w.capture.intrinsics, oracle_preset("streetlike"));
  const PseudoFrame p = o.generate(w.capture.pair(5), 5, 2);
  UncertaintyMap flat(p.image.width, p.image.height, 1.0, 5);
  const Localization a = uncertainty_localization(w.scene, w.capture, w.capture.pair(5), p, flat);
  EXPECT_GT(a.corrupted_mover_pixels, 0u);
  EXPECT_GT(a.background_pixels, a.corrupted_mover_pixels);
  EXPECT_NEAR(a.ratio(), 1.0, 1e-9);

  UncertaintyMap peaked = flat;
  const UncertaintyMap three(p.image.width, p.image.height, 3.0, 5);
  const auto& mask = p.meta->corruption_mask;
  for (size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) peaked.raw.data[i] = three.raw.data[i];
  const Localization b = uncertainty_localization(w.scene, w.capture, w.capture.pair(5), p, peaked);
  EXPECT_NEAR(b.corrupted_mover_beta, 3.0, 1e-9);
  EXPECT_NEAR(b.ratio(), 3.0, 1e-9);
}

TEST(Localization, RequiresMetadataAndMatchingSize) {
  const World& w = world();
  const Oracle o(w.scene, w.capture.intrinsics, oracle_preset("streetlike"));
  PseudoFrame p = o.generate(w.capture.pair(5), 5, 2);
  const UncertaintyMap wrong(10, 10, 1.0, 5);
  EXPECT_THROW(uncertainty_localization(w.scene, w.capture, w.capture.pair(5), p, wrong), ResolutionMismatch);
  p.meta.reset();
  const UncertaintyMap ok(p.image.width, p.image.height, 1.0, 5);
  EXPECT_THROW(uncertainty_localization(w.scene, w.capture, w.capture.pair(5), p, ok), std::invalid_argument);
}

TEST(Scatter, DrawsAxesAndPoints) {
  const Image img = scatter_plot({{{1.0, 1.0}}, {{0.0, 0.0}}}, 200, 120);
  EXPECT_EQ(img.width, 200);
  EXPECT_EQ(img.height, 120);
  EXPECT_EQ(img.channels, 3);
  EXPECT_EQ(img.at(100, 120 - 10, 0), 0.0);
  bool red = false;
  for (int y = 0; y < 120; ++y)
    for (int x = 0; x < 200; ++x)
      if (img.at(x, y, 0) > 0.8 && img.at(x, y, 1) < 0.3) red = true;
  EXPECT_TRUE(red);
}
