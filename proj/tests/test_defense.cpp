#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>

#include "flowpatch/attack/patch.hpp"
#include "flowpatch/attack/placement.hpp"
#include "flowpatch/core/error.hpp"
#include "flowpatch/defense/defense.hpp"
#include "flowpatch/defense/detection.hpp"
#include "flowpatch/defense/removal.hpp"
#include "flowpatch/defense/stages.hpp"
#include "flowpatch/diff/basic_stages.hpp"
#include "flowpatch/diff/grad_check.hpp"
#include "flowpatch/harness/synth.hpp"
#include "test_util.hpp"

using namespace flowpatch;
using namespace flowpatch::defense;
using flowpatch::testing::random_image;
using flowpatch::testing::random_raster;

namespace {

GradientMap map_of(int h, int w, std::initializer_list<double> v) {
  return GradientMap(Raster({h, w, 1}, std::vector<double>(v)));
}

// Smooth RGB background: a gentle diagonal ramp with a soft bump.
Image smooth_background(int h, int w) {
  Image img(h, w, 3);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double bump = 0.1 * std::exp(-((r - h / 2.0) * (r - h / 2.0) + (c - w / 3.0) * (c - w / 3.0)) / 200.0);
      const double base = 0.3 + 0.2 * c / w + 0.1 * r / h + bump;
      img.at(r, c, 0) = base;
      img.at(r, c, 1) = base * 0.9;
      img.at(r, c, 2) = base * 0.8 + 0.05;
    }
  }
  return img;
}

double masked_fraction(const PixelMask& mask, const PixelMask& region) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < region.pixels(); ++i) hit += region.test(i) && mask.test(i);
  return static_cast<double>(hit) / static_cast<double>(region.count());
}

Raster run_backward(const diff::Stage& stage, const Raster& x, const Raster& g) {
  diff::StageContext ctx{x.shape(), {}, {}};
  stage.forward(x, ctx);
  return stage.backward(ctx, g);
}

}  // namespace

TEST(DefenseConfig, Validation) {
  EXPECT_NO_THROW(DefenseConfig::lgs().validate());
  EXPECT_NO_THROW(DefenseConfig::ilp().validate());
  auto bad = [](auto edit) {
    DefenseConfig cfg;
    edit(cfg);
    return cfg;
  };
  EXPECT_THROW(bad([](auto& c) { c.overlap = 0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.overlap = 16; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.threshold = 1.5; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.t_ilp = -0.1; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.b_lgs = 0.0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.s_ilp = -1.0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.r_telea = 0; }).validate(), ConfigError);
  EXPECT_EQ(parse_defense_kind("ilp"), DefenseKind::ilp);
  EXPECT_THROW(parse_defense_kind("median"), ConfigError);
}

TEST(GradientMagnitude, ConstantImageIsZero) {
  const Image img(6, 7, 3, 0.4);
  for (auto order : {DerivativeOrder::first, DerivativeOrder::second}) {
    for (const auto r = gradient_magnitude(img, order); double v : r.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(GradientMagnitude, RampHasConstantInteriorSlope) {
  const int W = 8;
  Image img(5, W, 1);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < W; ++c) img.at(r, c) = static_cast<double>(c) / W;
  const GradientMap g = gradient_magnitude(img, DerivativeOrder::first);
  for (int r = 0; r < 5; ++r)
    for (int c = 1; c < W - 1; ++c) EXPECT_NEAR(g.at(r, c), 1.0 / W, 1e-15);
}

TEST(GradientMagnitude, LaplacianImpulse) {
  const double a = 0.6;
  Image img(5, 5, 1);
  img.at(2, 2) = a;
  const GradientMap g = gradient_magnitude(img, DerivativeOrder::second);
  EXPECT_DOUBLE_EQ(g.at(2, 2), 4 * a);
  EXPECT_DOUBLE_EQ(g.at(1, 2), a);
  EXPECT_DOUBLE_EQ(g.at(1, 1), 0.0);
}

TEST(Normalize, Examples) {
  const GradientMap n = normalize_map(map_of(2, 2, {0, 2, 4, 8}));
  EXPECT_EQ(n, map_of(2, 2, {0, 0.25, 0.5, 1}));
  for (const auto r = normalize_map(GradientMap(3, 3, 0.7)); double v : r.values()) EXPECT_EQ(v, 0.0);
  const GradientMap g(random_raster(6, 5, 1, 1, 0.0, 3.0));
  EXPECT_EQ(normalize_map(normalize_map(g)), normalize_map(g));
}

TEST(BlockVote, Examples) {
  for (const auto r = block_vote_mask(GradientMap(8, 8), 2, 1, 0.0).to_raster(); double v : r.values()) EXPECT_EQ(v, 0.0);

  GradientMap g(4, 4);
  g.at(0, 0) = 1.0;
  const PixelMask m = block_vote_mask(g, 2, 1, 0.2);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) EXPECT_EQ(m(r, c), r < 2 && c < 2) << r << "," << c;

  EXPECT_THROW(block_vote_mask(GradientMap(8, 4), 5, 1, 0.1), ConfigError);
}

TEST(BlockVote, MonotoneInThreshold) {
  const GradientMap g(random_raster(20, 24, 1, 2));
  PixelMask prev = block_vote_mask(g, 4, 2, 0.0);
  for (double t = 0.05; t <= 1.0; t += 0.05) {
    const PixelMask cur = block_vote_mask(g, 4, 2, t);
    for (std::size_t i = 0; i < cur.pixels(); ++i) EXPECT_TRUE(!cur.test(i) || prev.test(i));
    prev = cur;
  }
}

TEST(IlpReevaluate, Examples) {
  const PixelMask ones(3, 4, true);
  EXPECT_TRUE(ilp_reevaluate(ones, GradientMap(3, 4), 15, 0.5).none());
  EXPECT_TRUE(ilp_reevaluate(ones, GradientMap(3, 4, 0.1), 15, 0.5).all());
}

TEST(IlpReevaluate, SubsetOfCandidatesAndMonotone) {
  const GradientMap g(random_raster(10, 10, 1, 3));
  Rng rng(4);
  PixelMask m(10, 10);
  for (std::size_t i = 0; i < m.pixels(); ++i) m.set(i, rng.uniform() < 0.5);
  PixelMask prev = ilp_reevaluate(m, g, 15, 0.0);
  for (double t = 0.1; t <= 1.0; t += 0.1) {
    const PixelMask cur = ilp_reevaluate(m, g, 15, t);
    for (std::size_t i = 0; i < m.pixels(); ++i) {
      EXPECT_TRUE(!cur.test(i) || m.test(i));
      EXPECT_TRUE(!cur.test(i) || prev.test(i));
    }
    prev = cur;
  }
}

TEST(LgsSmooth, Examples) {
  const Image img = random_image(4, 4, 3, 5);
  const GradientMap g(random_raster(4, 4, 1, 6));
  EXPECT_EQ(lgs_smooth(img, g, PixelMask(4, 4), 15), img);

  const Image blackened = lgs_smooth(img, GradientMap(4, 4, 0.5), PixelMask(4, 4, true), 15);
  for (double v : blackened.values()) EXPECT_EQ(v, 0.0);

  Image px(1, 1, 3, 0.5);
  const Image out = lgs_smooth(px, GradientMap(1, 1, 0.04), PixelMask(1, 1, true), 15);
  for (double v : out.values()) EXPECT_NEAR(v, 0.2, 1e-15);
}

TEST(Telea, ConstantImageStaysConstant) {
  const Image img(9, 11, 3, 0.37);
  PixelMask m(9, 11);
  for (int r = 2; r < 7; ++r)
    for (int c = 3; c < 9; ++c) m.set(r, c);
  const Image out = telea_inpaint(img, m, 5);
  for (double v : out.values()) EXPECT_NEAR(v, 0.37, 1e-14);
}

TEST(Telea, UnmaskedPixelsUntouchedAndBounded) {
  const Image img = random_image(16, 16, 3, 7);
  PixelMask m(16, 16);
  for (int r = 4; r < 11; ++r)
    for (int c = 5; c < 13; ++c) m.set(r, c, (r + c) % 5 != 0);
  const Image out = telea_inpaint(img, m, 3);
  double lo = 1.0, hi = 0.0;
  for (std::size_t p = 0; p < m.pixels(); ++p) {
    for (int ch = 0; ch < 3; ++ch) {
      if (!m.test(p)) {
        EXPECT_EQ(out[p * 3 + ch], img[p * 3 + ch]);
        lo = std::min(lo, img[p * 3 + ch]);
        hi = std::max(hi, img[p * 3 + ch]);
      }
    }
  }
  for (std::size_t p = 0; p < m.pixels(); ++p) {
    if (!m.test(p)) continue;
    for (int ch = 0; ch < 3; ++ch) {
      EXPECT_GE(out[p * 3 + ch], lo);
      EXPECT_LE(out[p * 3 + ch], hi);
    }
  }
}

// A lone masked pixel with all four neighbours known has a flat arrival-time
// gradient, so every direction factor takes the same floor value and the fill
// reduces to the 1/d^2-weighted mean of the known pixels within the radius.
TEST(Telea, SinglePixelMatchesBruteForceWeights) {
  const double a = 0.2, b = 0.9;
  for (int radius : {1, 2, 3, 5}) {
    Image img(7, 7, 1);
    for (int r = 0; r < 7; ++r)
      for (int c = 0; c < 7; ++c) img.at(r, c) = c < 3 ? a : b;
    PixelMask m(7, 7);
    m.set(3, 3);
    double num = 0.0, den = 0.0;
    for (int r = 0; r < 7; ++r) {
      for (int c = 0; c < 7; ++c) {
        const int d2 = (r - 3) * (r - 3) + (c - 3) * (c - 3);
        if (d2 == 0 || d2 > radius * radius) continue;
        num += img.at(r, c) / d2;
        den += 1.0 / d2;
      }
    }
    const double filled = telea_inpaint(img, m, radius).at(3, 3);
    EXPECT_NEAR(filled, num / den, 1e-12) << "radius " << radius;
    EXPECT_GT(filled, a);
    EXPECT_LT(filled, b);
  }
}

TEST(Telea, Errors) {
  const Image img(4, 4, 1, 0.5);
  EXPECT_THROW(telea_inpaint(img, PixelMask(4, 4, true), 5), DomainError);
  EXPECT_THROW(telea_inpaint(img, PixelMask(4, 4), 0), ConfigError);
  EXPECT_EQ(telea_inpaint(img, PixelMask(4, 4), 5), img);
}

TEST(Defend, ConstantImageIsUntouched) {
  const Image img(32, 40, 3, 0.6);
  for (const auto& cfg : {DefenseConfig::lgs(), DefenseConfig::ilp()}) {
    const auto res = defend(img, cfg);
    EXPECT_TRUE(res.mask.none());
    EXPECT_EQ(res.image, img);
  }
}

TEST(Defend, OutputStaysInUnitRange) {
  const Image img = random_image(32, 32, 3, 8);
  for (const auto& cfg : {DefenseConfig::lgs(), DefenseConfig::ilp()}) {
    for (const auto r = defend(img, cfg).image; double v : r.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Defend, CheckerboardPatchIsDetected) {
  const Image bg = harness::synth_pairs({1, 64, 128, 7}).front().first;
  const auto patch = attack::manual_patch(24);
  const auto placed = attack::place_patch(bg, bg, patch.values(), {32, 64, 0.0, 1.0});
  for (const auto& cfg : {DefenseConfig::lgs(), DefenseConfig::ilp()}) {
    EXPECT_GE(masked_fraction(detect(placed.first, cfg), placed.footprint), 0.95) << to_string(cfg.kind);
    const double clean = static_cast<double>(detect(bg, cfg).count()) / (64.0 * 128.0);
    EXPECT_LT(clean, 0.05) << to_string(cfg.kind);
  }
}

TEST(Defend, DetectMatchesDefendMask) {
  const Image img = random_image(24, 24, 3, 9);
  for (const auto& cfg : {DefenseConfig::lgs(), DefenseConfig::ilp()}) {
    EXPECT_EQ(detect(img, cfg), defend(img, cfg).mask);
  }
}

TEST(DefenseStages, ForwardEqualsDefend) {
  const Image bg = smooth_background(48, 48);
  const auto placed = attack::place_patch(bg, bg, attack::manual_patch(16).values(), {24, 24, 0.0, 1.0});
  for (const auto& cfg : {DefenseConfig::lgs(), DefenseConfig::ilp()}) {
    const DefenseStage stage(cfg);
    diff::StageContext ctx{placed.first.shape(), {}, {}};
    const auto res = defend(placed.first, cfg);
    EXPECT_EQ(stage.forward(placed.first, ctx), res.image);
    EXPECT_EQ(DefenseStage::mask(ctx), res.mask);
  }
}

TEST(DefenseStages, ExactStagesPassGradCheck) {
  const Raster img = random_raster(8, 8, 3, 10, 0.1, 0.9);
  for (auto order : {DerivativeOrder::first, DerivativeOrder::second}) {
    const auto report = diff::grad_check(GradientMagnitudeStage(order), img, 1e-4, 1e-4);
    EXPECT_TRUE(report.passed) << report.max_relative_error;
  }
  const auto report = diff::grad_check(NormalizeStage(), random_raster(8, 8, 1, 11, 0.0, 2.0), 1e-4, 1e-4);
  EXPECT_TRUE(report.passed) << report.max_relative_error;
}

TEST(DefenseStages, NormalizeConstantHasZeroGradient) {
  const Raster g = run_backward(NormalizeStage(), Raster(3, 3, 1, 2.0), random_raster(3, 3, 1, 12));
  for (double v : g.values()) EXPECT_EQ(v, 0.0);
}

TEST(Bpda, BlockVoteAndThresholdAreIdentity) {
  const Raster x = random_raster(4, 4, 1, 13);
  const Raster g = random_raster(4, 4, 1, 14, -1.0, 1.0);
  EXPECT_EQ(run_backward(BlockVoteStage(2, 1, 0.3), x, g), g);
  const IlpThresholdStage ilp(GradientMap(random_raster(4, 4, 1, 15)), 15, 0.5);
  Raster candidates(4, 4, 1);
  for (std::size_t i = 0; i < 16; i += 3) candidates[i] = 1.0;
  EXPECT_EQ(run_backward(ilp, candidates, g), g);
}

TEST(Bpda, ClipZeroesSaturatedCoordinates) {
  const Raster x({4, 4, 1}, {-0.5, 0.0, 0.3, 1.0, 1.2, 0.9, -1e-9, 2.0, 0.5, 0.5, 3.0, 0.1, 0.0, 1.0 + 1e-12, 0.7, -4.0});
  const Raster g = random_raster(4, 4, 1, 16, 0.5, 1.0);
  const Raster out = run_backward(diff::ClipStage(), x, g);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(out[i], (x[i] < 0.0 || x[i] > 1.0) ? 0.0 : g[i]) << i;
}

TEST(Bpda, InpaintZeroesInpaintedPixels) {
  PixelMask m(4, 4);
  m.set(1, 1);
  m.set(2, 3);
  m.set(0, 2);
  const Raster x = random_raster(4, 4, 3, 17);
  const Raster g = random_raster(4, 4, 3, 18, 0.5, 1.0);
  const Raster out = run_backward(TeleaInpaintStage(m, 2), x, g);
  for (std::size_t p = 0; p < 16; ++p)
    for (int c = 0; c < 3; ++c) EXPECT_EQ(out[p * 3 + c], m.test(p) ? 0.0 : g[p * 3 + c]);
}

TEST(Bpda, IlpDefenseBackwardMasksCotangent) {
  DefenseConfig cfg = DefenseConfig::ilp();
  cfg.block_size = 2;
  cfg.overlap = 1;
  cfg.threshold = 0.3;
  cfg.r_telea = 2;
  const Raster x = random_raster(4, 4, 3, 19);
  const Raster g = random_raster(4, 4, 3, 20, -1.0, 1.0);
  const DefenseStage stage(cfg);
  diff::StageContext ctx{x.shape(), {}, {}};
  stage.forward(x, ctx);
  const PixelMask m = DefenseStage::mask(ctx);
  ASSERT_FALSE(m.none());
  ASSERT_FALSE(m.all());
  const Raster out = stage.backward(ctx, g);
  for (std::size_t p = 0; p < 16; ++p)
    for (int c = 0; c < 3; ++c) EXPECT_EQ(out[p * 3 + c], m.test(p) ? 0.0 : g[p * 3 + c]);
}

// LGS composite backward against the chain of individual stage rules.
TEST(Bpda, LgsDefenseBackwardChainsStageRules) {
  DefenseConfig cfg = DefenseConfig::lgs();
  cfg.block_size = 2;
  cfg.overlap = 1;
  cfg.threshold = 0.3;
  cfg.b_lgs = 1.5;
  const Raster x = random_raster(4, 4, 3, 21, 0.05, 0.95);
  const Raster g = random_raster(4, 4, 3, 22, -1.0, 1.0);

  diff::StageContext c0{x.shape(), {}, {}}, c1, c3;
  const Raster gm = GradientMagnitudeStage(DerivativeOrder::first).forward(x, c0);
  c1.input_shape = gm.shape();
  const Raster gbar = NormalizeStage().forward(gm, c1);
  const Raster m = block_vote_mask(GradientMap(gbar), 2, 1, 0.3).to_raster();
  Raster z(4, 4, 1);
  for (std::size_t p = 0; p < 16; ++p) z[p] = cfg.b_lgs * gbar[p] * m[p];
  c3.input_shape = z.shape();
  const Raster y = diff::ClipStage().forward(z, c3);

  Raster expected(4, 4, 3);
  Raster gy(4, 4, 1);
  for (std::size_t p = 0; p < 16; ++p) {
    for (int c = 0; c < 3; ++c) {
      expected[p * 3 + c] = g[p * 3 + c] * (1.0 - y[p]);
      gy[p] -= g[p * 3 + c] * x[p * 3 + c];
    }
  }
  const Raster gz = diff::ClipStage().backward(c3, gy);
  Raster ggbar(4, 4, 1);
  for (std::size_t p = 0; p < 16; ++p) ggbar[p] = cfg.b_lgs * (m[p] + gbar[p]) * gz[p];
  const Raster gi =
      GradientMagnitudeStage(DerivativeOrder::first).backward(c0, NormalizeStage().backward(c1, ggbar));
  for (std::size_t i = 0; i < expected.size(); ++i) expected[i] += gi[i];

  const DefenseStage stage(cfg);
  diff::StageContext ctx{x.shape(), {}, {}};
  stage.forward(x, ctx);
  const Raster out = stage.backward(ctx, g);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], expected[i], 1e-12) << i;
}

TEST(Bpda, PairStageSplitsHalves) {
  const DefenseConfig cfg = DefenseConfig::ilp();
  const Image a = smooth_background(32, 32);
  const auto placed = attack::place_patch(a, a, attack::manual_patch(12).values(), {16, 16, 0.0, 1.0});
  const Raster pair = stack_pair(placed.first, a);
  const PairDefenseStage stage(cfg);
  diff::StageContext ctx{pair.shape(), {}, {}};
  const auto [d1, d2] = unstack_pair(stage.forward(pair, ctx));
  EXPECT_EQ(d1, defend(placed.first, cfg).image);
  EXPECT_EQ(d2, defend(a, cfg).image);
  const Raster g = random_raster(32, 32, 6, 23, -1.0, 1.0);
  const auto [g1, g2] = unstack_pair(stage.backward(ctx, g));
  const auto [h1, h2] = unstack_pair(g);
  const PixelMask m1 = defend(placed.first, cfg).mask;
  for (std::size_t p = 0; p < m1.pixels(); ++p) {
    for (int c = 0; c < 3; ++c) {
      EXPECT_EQ(g1[p * 3 + c], m1.test(p) ? 0.0 : h1[p * 3 + c]);
      EXPECT_EQ(g2[p * 3 + c], h2[p * 3 + c]);
    }
  }
}
