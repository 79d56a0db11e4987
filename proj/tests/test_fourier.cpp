#include <gtest/gtest.h>

#include <cmath>

#include "bfstvsr/fourier.hpp"
#include "bfstvsr/grad_check.hpp"
#include "bfstvsr/verify.hpp"

using namespace bfstvsr;

TEST(FourierFeatures, ZeroOffsetKeepsCosineBlock) {
  const FourierRep<double> rep{{0.5, -2.0, 3.0, 4.0}, {1.3, -0.7, 2.2, 0.1}};
  const auto out = fourier_features(rep, 0.0, 0.0);
  EXPECT_EQ(out, (std::vector<double>{0.5, -2.0, 0.0, 0.0}));
}

TEST(FourierFeatures, QuarterPhaseHandExample) {
  const FourierRep<double> rep{{1.0, 1.0}, {1.0, 0.0}};
  const auto out = fourier_features(rep, 0.5, 0.0);
  EXPECT_NEAR(out[0], 0.0, 1e-15);
  EXPECT_NEAR(out[1], 1.0, 1e-15);
}

TEST(FourierFeatures, PythagoreanIdentityAndBound) {
  Rng rng(4);
  for (int k = 0; k < 200; ++k) {
    FourierRep<double> rep{std::vector<double>(6), std::vector<double>(6)};
    for (auto& a : rep.amplitudes) a = rng.uniform(0.1, 2.0) * (rng.bernoulli(0.5) ? 1 : -1);
    for (auto& f : rep.frequencies) f = rng.uniform(-4, 4);
    const auto out = fourier_features(rep, rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
    for (int i = 0; i < 3; ++i) {
      const double c = out[i] / rep.amplitudes[i];
      const double s = out[3 + i] / rep.amplitudes[3 + i];
      EXPECT_NEAR(c * c + s * s, 1.0, 1e-12);
      EXPECT_LE(std::abs(out[i]), std::abs(rep.amplitudes[i]));
    }
  }
}

TEST(FourierFeatures, PeriodicAlongOffset) {
  const FourierRep<double> rep{{1.0, 1.0}, {0.8, 0.0}};
  const auto a = fourier_features(rep, 0.1, 0.3);
  const auto b = fourier_features(rep, 0.1 + 2.0 / 0.8, 0.3);
  EXPECT_NEAR(a[0], b[0], 1e-12);
  EXPECT_NEAR(a[1], b[1], 1e-12);
}

TEST(FourierFeatures, BackwardAtZeroOffset) {
  const std::vector<double> amp{0.5, 2.0, -1.0, 3.0};
  const std::vector<double> freq{1.0, 2.0, -3.0, 0.5};
  const std::vector<double> d_out{1.0, 1.0, 1.0, 1.0};
  std::vector<double> d_amp(4, 0.0);
  std::vector<double> d_freq(4, 0.0);
  fourier_features_backward<double>(amp, freq, 0.0, 0.0, d_out, d_amp, d_freq);
  EXPECT_EQ(d_amp, (std::vector<double>{1.0, 1.0, 0.0, 0.0}));
  for (double g : d_freq) EXPECT_EQ(g, 0.0);
}

TEST(FourierFeatures, GradCheck) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    ParamStore<double> s;
    const auto a = s.add("a", {8});
    const auto f = s.add("f", {8});
    for (auto& v : s.value(a)) v = rng.uniform(-1, 1);
    for (auto& v : s.value(f)) v = rng.uniform(-3, 3);
    const double dx = rng.uniform(-0.5, 0.5);
    const double dy = rng.uniform(-0.5, 0.5);
    std::vector<double> w(8);
    for (auto& v : w) v = rng.uniform(-1, 1);
    const auto fn = [&](ParamStore<double>& p) {
      std::vector<double> out(8);
      fourier_features<double>(p.value(a), p.value(f), dx, dy, out);
      fourier_features_backward<double>(p.value(a), p.value(f), dx, dy, w, p.grad(a), p.grad(f));
      double l = 0.0;
      for (int i = 0; i < 8; ++i) l += w[i] * out[i];
      return l;
    };
    const auto rep = grad_check(fn, s, 1e-5, 1e-4);
    EXPECT_TRUE(rep.passed) << "seed " << seed << " err " << rep.max_rel_error;
  }
}

class FourierMapperTest : public ::testing::Test {
 protected:
  ParamStore<double> store;
  FourierMapper<double> mapper{store, "f", FourierMapperConfig{3, {8, 8}, 30.0}};
  std::vector<double> z{0.2, -0.1, 0.4};
  void SetUp() override { mapper.init(store, 7); }
};

TEST_F(FourierMapperTest, RepDependsOnLatentOnly) {
  const auto a = mapper.estimate_rep(store, z);
  const auto b = mapper.estimate_rep(store, z);
  EXPECT_EQ(a.amplitudes, b.amplitudes);
  EXPECT_EQ(a.frequencies, b.frequencies);
  EXPECT_EQ(a.amplitudes.size(), 6u);
  EXPECT_EQ(a.frequencies.size(), 6u);
}

TEST_F(FourierMapperTest, ZeroAmplitudesGiveProjectionBias) {
  const auto& amp = mapper.amplitude_estimator();
  const int last = amp.layer_count() - 1;
  std::ranges::fill(store.value(amp.weight(last)), 0.0);
  std::ranges::fill(store.value(amp.bias(last)), 0.0);
  auto bias = store.value(mapper.projection().bias());
  bias[0] = 0.1;
  bias[1] = -0.2;
  bias[2] = 0.3;
  const auto out = mapper.feature_at(store, z, 0.2, -0.4);
  EXPECT_EQ(out, (std::vector<double>{0.1, -0.2, 0.3}));
}

TEST_F(FourierMapperTest, ContinuousInOffset) {
  const auto a = mapper.feature_at(store, z, 0.2, -0.1);
  const auto b = mapper.feature_at(store, z, 0.2 + 1e-6, -0.1);
  for (int i = 0; i < 3; ++i) EXPECT_LT(std::abs(a[i] - b[i]), 1e-3);
}

TEST_F(FourierMapperTest, ZeroOffsetUsesCosineBlock) {
  const auto rep = mapper.estimate_rep(store, z);
  std::vector<double> feat(rep.amplitudes.begin(), rep.amplitudes.end());
  for (int i = 3; i < 6; ++i) feat[i] = 0.0;
  std::vector<double> expect(3);
  mapper.projection().forward(store, feat, expect);
  EXPECT_EQ(mapper.feature_at(store, rep, 0.0, 0.0), expect);
}

TEST_F(FourierMapperTest, RejectsWrongLatentSize) {
  std::vector<double> bad{1.0};
  EXPECT_THROW(mapper.estimate_rep(store, bad), std::invalid_argument);
}

TEST(FourierMapper, ModuleGradCheck) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto rep = gradcheck_fourier_mapper(seed, 1e-5, 1e-4);
    EXPECT_TRUE(rep.passed) << "seed " << seed << " err " << rep.max_rel_error;
  }
}
