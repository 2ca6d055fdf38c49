#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "flickerband/geometry.hpp"

using namespace flickerband;

namespace {

BandingParams zero_jitter(double w = 10, double g = 30, double phi = 0) {
  BandingParams p;
  p.width_w = w;
  p.gap_g = g;
  p.phase_phi = phi;
  return p;
}

}  // namespace

TEST(RotateCoords, CenterMapsToOrigin) {
  const auto c = rotate_coords(2, 1, 5, 3, 0.0);
  EXPECT_EQ(c.u, 0.0);
  EXPECT_EQ(c.v, 0.0);
}

TEST(RotateCoords, IdentityAtZeroAngle) {
  const auto c = rotate_coords(4, 1, 5, 3, 0.0);
  EXPECT_EQ(c.u, 2.0);
  EXPECT_EQ(c.v, 0.0);
}

TEST(RotateCoords, QuarterTurnMatchesMatrixProduct) {
  const double th = std::numbers::pi / 2;
  const auto c = rotate_coords(4, 1, 5, 3, th);
  // Brute-force [cos sin; -sin cos] * (dx, dy).
  const double dx = 4 - 2.0, dy = 1 - 1.0;
  const double u = std::cos(th) * dx + std::sin(th) * dy;
  const double v = -std::sin(th) * dx + std::cos(th) * dy;
  EXPECT_NEAR(c.u, u, 1e-12);
  EXPECT_NEAR(c.v, v, 1e-12);
  EXPECT_NEAR(c.u, 0.0, 1e-12);
  EXPECT_NEAR(c.v, -2.0, 1e-12);
}

TEST(RotateCoords, IsometryProperty) {
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    const int w = 1 + static_cast<int>(rng.uniform() * 600), h = 1 + static_cast<int>(rng.uniform() * 600);
    const double x = std::floor(rng.uniform() * w), y = std::floor(rng.uniform() * h);
    const double th = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const auto c = rotate_coords(x, y, w, h, th);
    const double dx = x - (w - 1) / 2.0, dy = y - (h - 1) / 2.0;
    ASSERT_NEAR(c.u * c.u + c.v * c.v, dx * dx + dy * dy, 1e-9 * std::max(1.0, dx * dx + dy * dy));
  }
}

TEST(Params, ValidationRejectsInvariantViolations) {
  EXPECT_NO_THROW(validate(zero_jitter()));
  auto bad = [](auto mutate) {
    BandingParams p = zero_jitter();
    mutate(p);
    return p;
  };
  EXPECT_THROW(validate(bad([](auto& p) { p.width_w = 0; })), InvalidParams);
  EXPECT_THROW(validate(bad([](auto& p) { p.gap_g = -1; })), InvalidParams);
  EXPECT_THROW(validate(bad([](auto& p) { p.v_y = 0; })), InvalidParams);
  EXPECT_THROW(validate(bad([](auto& p) { p.v_y = 1.01; })), InvalidParams);
  EXPECT_THROW(validate(bad([](auto& p) { p.delta_g = 30; })), InvalidParams);
  EXPECT_THROW(validate(bad([](auto& p) { p.delta_w = 10; })), InvalidParams);
  EXPECT_THROW(validate(bad([](auto& p) { p.theta = std::numbers::pi; })), InvalidParams);
  EXPECT_THROW(validate(bad([](auto& p) { p.sigma_theta = -0.1; })), InvalidParams);
  EXPECT_THROW(validate(bad([](auto& p) { p.edge_corr_len = 0.5; })), InvalidParams);
  EXPECT_THROW(validate(bad([](auto& p) { p.feather_px = -1; })), InvalidParams);
  EXPECT_THROW(validate(bad([](auto& p) { p.noise_alpha = -1; })), InvalidParams);
  EXPECT_NO_THROW(validate(bad([](auto& p) { p.v_y = 1.0; })));
}

TEST(SampleJitter, ZeroAmplitudesGiveZeroOffsets) {
  const BandingParams p = zero_jitter();
  const JitterTrace t = sample_jitter(p, Rng(1), -3, 20, 64);
  ASSERT_EQ(t.size(), 20u);
  EXPECT_EQ(t.stripe_indices.front(), -3);
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_EQ(t.angle_offsets[i], 0.0);
    EXPECT_EQ(t.spacing_offsets[i], 0.0);
    EXPECT_EQ(t.width_offsets[i], 0.0);
    EXPECT_EQ(t.eta_top[i].size(), 64u);
    EXPECT_EQ(p.delta_edge * t.eta_top[i][0], 0.0);
  }
}

TEST(SampleJitter, AngleStdAndMean) {
  BandingParams p = zero_jitter();
  p.sigma_theta = 0.01;
  const int n = 10000;
  const JitterTrace t = sample_jitter(p, Rng(2), 0, n, 1);
  double s = 0, s2 = 0;
  for (double a : t.angle_offsets) {
    s += a;
    s2 += a * a;
  }
  const double mean = s / n;
  const double sd = std::sqrt(s2 / n - mean * mean);
  EXPECT_NEAR(sd, 0.01, 0.05 * 0.01);
  EXPECT_LE(std::abs(mean), 3 * 0.01 / std::sqrt(double(n)));
}

TEST(SampleJitter, SpacingAndWidthWithinSupport) {
  BandingParams p = zero_jitter(10, 30);
  p.delta_g = 3;
  p.delta_w = 4;
  const JitterTrace t = sample_jitter(p, Rng(3), -50, 500, 1);
  double max_dg = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    ASSERT_LE(std::abs(t.spacing_offsets[i]), 3.0);
    ASSERT_LE(std::abs(t.width_offsets[i]), 4.0);
    max_dg = std::max(max_dg, std::abs(t.spacing_offsets[i]));
  }
  EXPECT_GT(max_dg, 2.5);
}

TEST(SampleJitter, NonInversionHolds) {
  BandingParams p = zero_jitter(20, 4);
  p.delta_g = 3.9;
  p.delta_w = 19;
  const JitterTrace t = sample_jitter(p, Rng(4), 0, 2000, 1);
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double prev_top = (i - 1) * p.period() + t.spacing_offsets[i - 1] + 0.5 * (p.width_w + t.width_offsets[i - 1]);
    const double bot = i * p.period() + t.spacing_offsets[i] - 0.5 * (p.width_w + t.width_offsets[i]);
    ASSERT_GT(bot - prev_top, -1e-9);
    ASSERT_GT(p.width_w + t.width_offsets[i], 0.0);
  }
}

TEST(SampleJitter, Deterministic) {
  BandingParams p = zero_jitter();
  p.sigma_theta = 0.02;
  p.delta_g = 2;
  p.delta_w = 2;
  p.delta_edge = 1;
  const JitterTrace a = sample_jitter(p, Rng(77), -5, 30, 100);
  const JitterTrace b = sample_jitter(p, Rng(77), -5, 30, 100);
  EXPECT_EQ(a, b);
  const JitterTrace c = sample_jitter(p, Rng(78), -5, 30, 100);
  EXPECT_NE(a.spacing_offsets, c.spacing_offsets);
}

TEST(SampleJitter, RejectsBadArguments) {
  EXPECT_THROW(sample_jitter(zero_jitter(), Rng(1), 0, 0, 1), std::invalid_argument);
  EXPECT_THROW(sample_jitter(zero_jitter(), Rng(1), 0, 1, 0), std::invalid_argument);
  BandingParams bad = zero_jitter();
  bad.delta_g = 40;
  EXPECT_THROW(sample_jitter(bad, Rng(1), 0, 1, 1), InvalidParams);
}

TEST(Centerlines, ZeroJitterRange) {
  const BandingParams p = zero_jitter(10, 30);
  const JitterTrace t = sample_jitter(p, Rng(1), -5, 15, 1);
  const auto lines = stripe_centerlines(p, t, 0, 100);
  std::vector<double> centers;
  for (const auto& l : lines) centers.push_back(l.center_v);
  // Stripes at -40 and 120 do not reach into [0, 100] with w = 10.
  EXPECT_EQ(centers, (std::vector<double>{0, 40, 80}));
  for (const auto& l : lines) EXPECT_EQ(l.width, 10.0);
}

TEST(Centerlines, BoundaryStripeIncludedWhenItReachesIn) {
  const BandingParams p = zero_jitter(10, 30);
  const JitterTrace t = sample_jitter(p, Rng(1), -5, 15, 1);
  // Stripe k = 3 spans [115, 125] and k = -1 spans [-45, -35].
  const auto lines = stripe_centerlines(p, t, -36, 116);
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_EQ(lines.front().center_v, -40.0);
  EXPECT_EQ(lines.back().center_v, 120.0);
}

TEST(Centerlines, PhaseShift) {
  const BandingParams p = zero_jitter(10, 30, 5);
  const JitterTrace t = sample_jitter(p, Rng(1), -5, 15, 1);
  const auto lines = stripe_centerlines(p, t, 0, 100);
  std::vector<double> centers;
  for (const auto& l : lines) centers.push_back(l.center_v);
  EXPECT_EQ(centers, (std::vector<double>{5, 45, 85}));
}

TEST(Centerlines, SingleSpacingOffset) {
  const BandingParams p = zero_jitter(10, 30);
  JitterTrace t = sample_jitter(p, Rng(1), -5, 15, 1);
  t.spacing_offsets[static_cast<std::size_t>(t.find(1))] = 2.0;
  const auto lines = stripe_centerlines(p, t, 0, 100);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0].center_v, 0.0);
  EXPECT_EQ(lines[1].center_v, 42.0);
  EXPECT_EQ(lines[2].center_v, 80.0);
}

TEST(Centerlines, ExactlyPeriodicWithoutJitter) {
  const BandingParams p = zero_jitter(7.25, 13.5, 3.1);
  const JitterTrace t = sample_jitter(p, Rng(1), -40, 120, 1);
  const auto lines = stripe_centerlines(p, t, -500, 500);
  for (std::size_t i = 1; i < lines.size(); ++i)
    EXPECT_NEAR(lines[i].center_v - lines[i - 1].center_v, p.period(), 1e-12);
}

TEST(Centerlines, MissingTraceEntryThrows) {
  const BandingParams p = zero_jitter();
  const JitterTrace t = sample_jitter(p, Rng(1), 0, 2, 1);
  EXPECT_THROW(stripe_centerlines(p, t, 0, 200), std::out_of_range);
  EXPECT_THROW(stripe_centerlines(p, t, 10, 10), std::invalid_argument);
}

TEST(LowpassNoise, LengthOneIsStandardNormalDraw) {
  Rng a(9), b(9);
  const auto v = lowpass_noise_1d(1, 32, a);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_TRUE(std::isfinite(v[0]));
  EXPECT_EQ(v, lowpass_noise_1d(1, 32, b));
  // Marginal of the length-1 output is N(0, 1).
  double s2 = 0;
  for (int i = 0; i < 20000; ++i) {
    Rng r(1000 + i);
    const double z = lowpass_noise_1d(1, 32, r)[0];
    s2 += z * z;
  }
  EXPECT_NEAR(s2 / 20000, 1.0, 0.05);
}

TEST(LowpassNoise, VarianceAndCorrelation) {
  Rng rng(10);
  const auto v = lowpass_noise_1d(100000, 32, rng);
  double s = 0, s2 = 0, lag = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    s += v[i];
    s2 += v[i] * v[i];
    if (i) lag += v[i] * v[i - 1];
  }
  const double n = static_cast<double>(v.size());
  const double mean = s / n, var = s2 / n - mean * mean;
  EXPECT_GE(var, 0.9);
  EXPECT_LE(var, 1.1);
  EXPECT_GE((lag / (n - 1) - mean * mean) / var, 0.5);
}

TEST(LowpassNoise, LagOneCorrelationAtCorrLenEight) {
  Rng rng(12);
  const auto v = lowpass_noise_1d(50000, 8, rng);
  double s2 = 0, lag = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    s2 += v[i] * v[i];
    if (i) lag += v[i] * v[i - 1];
  }
  EXPECT_GE(lag / s2, 0.5);
}

TEST(LowpassNoise, DeterministicAndValidated) {
  Rng a(3), b(3);
  EXPECT_EQ(lowpass_noise_1d(500, 16, a), lowpass_noise_1d(500, 16, b));
  Rng c(3);
  EXPECT_THROW(lowpass_noise_1d(0, 16, c), std::invalid_argument);
  EXPECT_THROW(lowpass_noise_1d(5, 0.5, c), std::invalid_argument);
}

TEST(Coverage, TraceCoversImageForAnyAngle) {
  for (double th : {0.0, 0.3, -1.2, 2.5}) {
    BandingParams p = zero_jitter(6, 11);
    p.theta = th;
    p.sigma_theta = 0.02;
    const auto t = sample_jitter_for_image(p, 200, 120);
    const double r = 0.5 * 119;  // inside the projected extent for every angle
    const auto lines = stripe_centerlines(p, t, -r, r);
    EXPECT_GE(lines.size(), static_cast<std::size_t>(2 * r / p.period()));
  }
}
