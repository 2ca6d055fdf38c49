#include <gtest/gtest.h>

#include <cmath>

#include "flickerband/degradation.hpp"
#include "flickerband/metrics.hpp"
#include "test_content.hpp"

using namespace flickerband;

namespace {

BandingParams banding(double v_y, double feather = 2.0) {
  BandingParams p;
  p.width_w = 12;
  p.gap_g = 20;
  p.theta = 0.15;
  p.feather_px = feather;
  p.v_y = v_y;
  p.seed = 17;
  return p;
}

}  // namespace

TEST(BandingLuma, UnitFactorIsIdentity) {
  Plane y(4, 4, 0.37);
  y(1, 2) = 0.9;
  const Plane out = apply_banding_luma(y, FlickerMask(4, 4, 1.0), 1.0);
  EXPECT_EQ(out, y);
}

TEST(BandingLuma, FullMask) {
  const Plane out = apply_banding_luma(Plane(3, 3, 0.8), FlickerMask(3, 3, 1.0), 0.5);
  for (double v : out.values()) EXPECT_NEAR(v, 0.4, 1e-15);
}

TEST(BandingLuma, FeatheredPixel) {
  const Plane out = apply_banding_luma(Plane(1, 1, 0.8), FlickerMask(1, 1, 0.5), 0.5);
  EXPECT_NEAR(out(0, 0), 0.5 * 0.8 * 0.5 + 0.8 * 0.5, 1e-15);
  EXPECT_NEAR(out(0, 0), 0.6, 1e-15);
}

TEST(BandingLuma, SandwichProperty) {
  Rng rng(21);
  Plane y(300, 300);
  Plane m(300, 300);
  for (double& v : y.values()) v = rng.uniform();
  for (double& v : m.values()) v = rng.uniform();
  for (double vy : {0.2, 0.5, 0.77, 1.0}) {
    const Plane out = apply_banding_luma(y, FlickerMask(m), vy);
    for (std::size_t i = 0; i < y.size(); ++i) {
      ASSERT_LE(vy * y.values()[i], out.values()[i]);
      ASSERT_LE(out.values()[i], y.values()[i]);
    }
  }
}

TEST(BandingLuma, Errors) {
  EXPECT_THROW(apply_banding_luma(Plane(2, 2), FlickerMask(3, 2, 0.0), 0.5), std::invalid_argument);
  EXPECT_THROW(apply_banding_luma(Plane(2, 2), FlickerMask(2, 2, 0.0), 0.0), std::invalid_argument);
}

TEST(SensorNoise, ZeroStrengthIsIdentity) {
  const RgbImage img = fbtest::clean_content(32, 32, 1);
  EXPECT_EQ(sensor_noise(img, 0, 0, 5), img);
}

TEST(SensorNoise, VarianceMatchesModel) {
  const RgbImage img = fbtest::constant_image(1000, 334, 0.5, 0.5, 0.5);
  const RgbImage out = sensor_noise(img, 0.01, 0.02, 77, /*clamp=*/false);
  double s = 0, s2 = 0;
  std::size_t n = 0;
  for (int c = 0; c < 3; ++c)
    for (double v : out.plane(c).values()) {
      const double d = v - 0.5;
      s += d;
      s2 += d * d;
      ++n;
    }
  const double mean = s / n, var = s2 / n - mean * mean;
  EXPECT_NEAR(var, 0.0054, 0.05 * 0.0054);
  EXPECT_NEAR(mean, 0.0, 3 * std::sqrt(0.0054 / n));
}

TEST(SensorNoise, SignalDependentTermVanishesAtBlack) {
  const RgbImage img = fbtest::constant_image(16, 16, 0, 0, 0);
  EXPECT_EQ(sensor_noise(img, 0.01, 0.0, 3), img);
}

TEST(SensorNoise, ClampedOutputAndKeyDependence) {
  const RgbImage img = fbtest::constant_image(64, 64, 0.02, 0.5, 0.98);
  const RgbImage a = sensor_noise(img, 0.02, 0.05, 1);
  for (int c = 0; c < 3; ++c)
    for (double v : a.plane(c).values()) ASSERT_TRUE(v >= 0 && v <= 1);
  EXPECT_EQ(a, sensor_noise(img, 0.02, 0.05, 1));
  EXPECT_NE(a, sensor_noise(img, 0.02, 0.05, 2));
  EXPECT_THROW(sensor_noise(img, -1, 0, 1), std::invalid_argument);
}

TEST(SynthesizeLq, NoOpDegradation) {
  const RgbImage hq = fbtest::clean_content(64, 48, 2);
  const DegradationOutput d = synthesize_lq(hq, banding(1.0));
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < hq.c0.size(); ++i)
      ASSERT_NEAR(d.lq.plane(c).values()[i], hq.plane(c).values()[i], 1e-6);
}

TEST(SynthesizeLq, Deterministic) {
  const RgbImage hq = fbtest::clean_content(80, 60, 3);
  BandingParams p = banding(0.5);
  p.noise_alpha = 0.01;
  p.noise_sigma_r = 0.01;
  p.delta_edge = 2;
  const DegradationOutput a = synthesize_lq(hq, p), b = synthesize_lq(hq, p);
  EXPECT_EQ(a.lq, b.lq);
  EXPECT_EQ(a.mask, b.mask);
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_EQ(a.params, p);
  EXPECT_EQ(a.lq.width(), 80);
  EXPECT_EQ(a.mask.height(), 60);
}

TEST(SynthesizeLq, PsnrDecreasesWithDarkening) {
  const RgbImage hq = fbtest::clean_content(96, 96, 4);
  double prev = kPsnrCap + 1;
  for (double vy : {0.9, 0.6, 0.3}) {
    const double q = psnr(to_tensor(synthesize_lq(hq, banding(vy)).lq), to_tensor(hq));
    EXPECT_LT(q, prev);
    prev = q;
  }
}

TEST(SynthesizeLq, MaskOffPixelsUnchanged) {
  const RgbImage hq = fbtest::clean_content(64, 64, 5);
  const DegradationOutput d = synthesize_lq(hq, banding(0.4));
  int off = 0;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      if (d.mask(x, y) == 0.0) {
        ++off;
        for (int c = 0; c < 3; ++c) ASSERT_NEAR(d.lq.plane(c)(x, y), hq.plane(c)(x, y), 1e-6);
      }
  EXPECT_GT(off, 100);
}

TEST(SynthesizeLq, ChromaPreservedBeforeNoise) {
  const RgbImage hq = fbtest::clean_content(64, 64, 6);
  const YccImage hq_ycc = rgb_to_ycc(hq);
  const FlickerMask m = render_mask(banding(0.3), sample_jitter_for_image(banding(0.3), 64, 64), 64, 64);
  const YccImage lq_ycc = banded_ycc(hq_ycc, m, 0.3);
  EXPECT_EQ(lq_ycc.c1, hq_ycc.c1);
  EXPECT_EQ(lq_ycc.c2, hq_ycc.c2);
  // Recomposed then re-analysed chroma agrees to round-trip precision.
  const YccImage again = rgb_to_ycc(ycc_to_rgb(lq_ycc, false));
  for (std::size_t i = 0; i < hq_ycc.c1.size(); ++i) {
    ASSERT_NEAR(again.c1.values()[i], hq_ycc.c1.values()[i], 1e-12);
    ASSERT_NEAR(again.c2.values()[i], hq_ycc.c2.values()[i], 1e-12);
  }
}

TEST(SynthesizeLq, LumaDarkenedInsideBand) {
  const RgbImage hq = fbtest::constant_image(40, 40, 0.6, 0.6, 0.6);
  const DegradationOutput d = synthesize_lq(hq, banding(0.5, 0.0));
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 40; ++x) {
      const double expect = d.mask(x, y) == 1.0 ? 0.3 : 0.6;
      ASSERT_NEAR(d.lq.c0(x, y), expect, 1e-12);
    }
}

TEST(SynthesizeLq, RejectsInvalidParams) {
  const RgbImage hq = fbtest::clean_content(16, 16, 7);
  BandingParams p = banding(0.5);
  p.delta_w = p.width_w;
  EXPECT_THROW(synthesize_lq(hq, p), InvalidParams);
  EXPECT_THROW(synthesize_lq(RgbImage(), banding(0.5)), std::invalid_argument);
}
