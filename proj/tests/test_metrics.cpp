#include <gtest/gtest.h>

#include <cmath>

#include "bfstvsr/metrics.hpp"
#include "bfstvsr/rng.hpp"

using namespace bfstvsr;

namespace {

FeatureGrid<double> rgb(double r, double g, double b) {
  return FeatureGrid<double>(3, 1, 1, std::vector<double>{r, g, b});
}

FeatureGrid<double> texture(int n, std::uint64_t seed) {
  Rng rng(seed);
  FeatureGrid<double> f(1, n, n);
  const double fx = rng.uniform(0.05, 0.2);
  const double fy = rng.uniform(0.05, 0.2);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      f(0, y, x) = 0.5 + 0.3 * std::sin(2 * std::numbers::pi * (fx * x + fy * y)) + 0.05 * rng.uniform(-1, 1);
    }
  }
  return f;
}

}  // namespace

TEST(RgbToY, VideoRangeEndpoints) {
  EXPECT_NEAR(rgb_to_y(rgb(0, 0, 0))(0, 0, 0), 16.0 / 255.0, 1e-15);
  EXPECT_NEAR(rgb_to_y(rgb(1, 1, 1))(0, 0, 0), 235.0 / 255.0, 1e-12);
  EXPECT_NEAR(rgb_to_y(rgb(1, 1, 1))(0, 0, 0), 0.92157, 1e-5);
  EXPECT_GT(rgb_to_y(rgb(0, 1, 0))(0, 0, 0), rgb_to_y(rgb(0, 0, 1))(0, 0, 0));
  EXPECT_THROW(rgb_to_y(FeatureGrid<double>(1, 2, 2)), std::invalid_argument);
}

TEST(Psnr, HandValues) {
  const FeatureGrid<double> a(1, 4, 4, 0.5);
  EXPECT_EQ(psnr(a, a), 99.0);
  const FeatureGrid<double> b(1, 4, 4, 0.6);
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-9);
  const FeatureGrid<double> c(1, 4, 4, 0.5 + 1.0 / 255.0);
  EXPECT_NEAR(psnr(a, c), 48.13, 5e-3);
  EXPECT_NEAR(psnr(a, c), 20.0 * std::log10(255.0), 1e-9);
}

TEST(Psnr, SymmetricAndMonotone) {
  const auto a = texture(8, 1);
  const auto b = texture(8, 2);
  EXPECT_EQ(psnr(a, b), psnr(b, a));
  double last = 1e9;
  for (double e : {0.01, 0.02, 0.05, 0.1}) {
    FeatureGrid<double> d = a;
    for (auto& v : d.data()) v += e;
    const double p = psnr(a, d);
    EXPECT_LT(p, last);
    last = p;
  }
  EXPECT_THROW(psnr(a, FeatureGrid<double>(1, 4, 4)), std::invalid_argument);
}

TEST(Ssim, IdenticalIsOne) {
  const auto a = texture(16, 3);
  EXPECT_EQ(ssim(a, a), 1.0);
}

TEST(Ssim, InvertedCheckerboardIsNegative) {
  FeatureGrid<double> a(1, 16, 16);
  FeatureGrid<double> b(1, 16, 16);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      a(0, y, x) = (x + y) % 2;
      b(0, y, x) = 1.0 - a(0, y, x);
    }
  }
  EXPECT_LT(ssim(a, b), 0.1);
}

TEST(Ssim, SmallOffsetStaysHigh) {
  const auto a = texture(24, 4);
  FeatureGrid<double> b = a;
  for (auto& v : b.data()) v += 0.05;
  EXPECT_GT(ssim(a, b), 0.9);
}

TEST(Ssim, SymmetricAndRejectsSmallImages) {
  const auto a = texture(16, 5);
  const auto b = texture(16, 6);
  EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
  EXPECT_THROW(ssim(FeatureGrid<double>(1, 10, 10), FeatureGrid<double>(1, 10, 10)), std::invalid_argument);
}

TEST(BlendBaseline, EndpointsAndMidpoint) {
  const FeatureGrid<double> a(3, 3, 3, 0.2);
  const FeatureGrid<double> b(3, 3, 3, 0.6);
  const auto mid = blend_baseline(a, b, 0.5, 2.0);
  EXPECT_EQ(mid.height(), 6);
  for (double v : mid.data()) EXPECT_NEAR(v, 0.4, 1e-12);
  const auto start = blend_baseline(a, b, 0.0, 2.0);
  for (double v : start.data()) EXPECT_NEAR(v, 0.2, 1e-12);
}

TEST(YMetrics, MixedPrecisionInputs) {
  FeatureGrid<float> a(3, 12, 12, 0.3f);
  FeatureGrid<double> b(3, 12, 12, 0.3);
  EXPECT_EQ(y_psnr(a, b), 99.0);
  EXPECT_NEAR(y_ssim(a, b), 1.0, 1e-6);
}
