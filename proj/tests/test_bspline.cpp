#include <gtest/gtest.h>

#include <cmath>

#include "bfstvsr/bspline.hpp"
#include "bfstvsr/grad_check.hpp"

using namespace bfstvsr;

namespace {

// Cox-de Boor recursion on integer knots -2..2, right-closed pieces.
double cox_de_boor(int i, int p, double x) {
  const double ki = i - 2;
  if (p == 0) return (x > ki && x <= ki + 1) ? 1.0 : 0.0;
  const double left = (x - ki) / p * cox_de_boor(i, p - 1, x);
  const double right = (ki + p + 1 - x) / p * cox_de_boor(i + 1, p - 1, x);
  return left + right;
}

}  // namespace

TEST(BSpline3, KnownValues) {
  EXPECT_DOUBLE_EQ(bspline3(0.0), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(bspline3(1.0), 1.0 / 6.0);
  EXPECT_DOUBLE_EQ(bspline3(-1.0), 1.0 / 6.0);
  EXPECT_EQ(bspline3(2.0), 0.0);
  EXPECT_EQ(bspline3(-2.0), 0.0);
  EXPECT_NEAR(bspline3(-1.5), 0.125 / 6.0, 1e-15);
  EXPECT_NEAR(bspline3(-1.5), 0.0208333, 1e-7);
}

TEST(BSpline3, MatchesCoxDeBoor) {
  for (double x = -2.5; x <= 2.5; x += 0.01) EXPECT_NEAR(bspline3(x), cox_de_boor(0, 3, x), 1e-12) << x;
}

TEST(BSpline3, PartitionOfUnity) {
  for (int k = 0; k < 1000; ++k) {
    const double x = -1.0 + 2.0 * k / 999.0;
    double sum = 0.0;
    for (int j = -3; j <= 3; ++j) sum += bspline3(x - j);
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(BSpline3, ShapeProperties) {
  for (double x = -3.0; x <= 3.0; x += 0.0137) {
    EXPECT_GE(bspline3(x), 0.0);
    EXPECT_LE(bspline3(x), 2.0 / 3.0);
    EXPECT_NEAR(bspline3(x), bspline3(-x), 1e-15);
    if (std::abs(x) >= 2.0) {
      EXPECT_EQ(bspline3(x), 0.0);
    }
  }
}

TEST(BSpline3, SecondDerivativeContinuousAtKnots) {
  const double h = 1e-4;
  for (double k : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
    const double left = (bspline3(k) - 2 * bspline3(k - h) + bspline3(k - 2 * h)) / (h * h);
    const double right = (bspline3(k + 2 * h) - 2 * bspline3(k + h) + bspline3(k)) / (h * h);
    EXPECT_NEAR(left, right, 1e-3) << k;
  }
}

TEST(BSpline3Deriv, KnownValues) {
  EXPECT_EQ(bspline3_deriv(0.0), 0.0);
  EXPECT_DOUBLE_EQ(bspline3_deriv(1.0), -0.5);
  EXPECT_DOUBLE_EQ(bspline3_deriv(-1.0), 0.5);
  EXPECT_EQ(bspline3_deriv(2.5), 0.0);
}

TEST(BSpline3Deriv, MatchesCentralDifference) {
  Rng rng(11);
  for (int k = 0; k < 500; ++k) {
    double x = rng.uniform(-2.2, 2.2);
    if (std::abs(x - std::round(x)) < 1e-3) continue;
    const double h = 1e-6;
    const double fd = (bspline3(x + h) - bspline3(x - h)) / (2 * h);
    const double an = bspline3_deriv(x);
    EXPECT_LT(std::abs(fd - an) / std::max(std::abs(an), 1e-3), 1e-6) << x;
  }
}

TEST(EvalBasis, HandExamples) {
  BSplineMotionRep<double> rep{{2.0}, {0.0}, {1.0}};
  EXPECT_NEAR(eval_basis(rep, 1.0)[0], 1.0 / 3.0, 1e-15);
  BSplineMotionRep<double> centred{{1.0, 1.0, 1.0}, {0.3, 0.3, 0.3}, {1.0, 1.0, 1.0}};
  for (double v : eval_basis(centred, 0.3)) EXPECT_DOUBLE_EQ(v, 2.0 / 3.0);
}

TEST(EvalBasis, OutsideSupportIsZero) {
  BSplineMotionRep<double> rep{{5.0, -1.0}, {3.0, -2.5}, {0.5, 1.0}};
  for (double v : eval_basis(rep, 0.5)) EXPECT_EQ(v, 0.0);
}

TEST(EvalBasis, BackwardHandExample) {
  BSplineMotionRep<double> rep{{1.0}, {0.0}, {1.0}};
  const std::vector<double> d_out{1.0};
  const auto g = eval_basis_backward<double>(rep, 1.0, d_out);
  EXPECT_DOUBLE_EQ(g.d_t_hat, -0.5);
  EXPECT_DOUBLE_EQ(g.d_coefficients[0], 1.0 / 6.0);
  EXPECT_DOUBLE_EQ(g.d_knots[0], 0.5);
}

TEST(EvalBasis, GradCheckRandomRep) {
  Rng rng(21);
  for (int seed = 0; seed < 10; ++seed) {
    ParamStore<double> s;
    const int n = 6;
    const auto c = s.add("c", {n});
    const auto k = s.add("k", {n});
    const auto d = s.add("d", {n});
    const auto t = s.add("t", {1});
    for (int i = 0; i < n; ++i) {
      s.value(c)[i] = rng.uniform(-1, 1);
      s.value(k)[i] = rng.uniform(0, 1);
      s.value(d)[i] = rng.uniform(0.3, 1.5);
    }
    s.value(t)[0] = rng.uniform(0, 1);
    std::vector<double> w(n);
    for (auto& v : w) v = rng.uniform(-1, 1);
    bool near_knot = false;
    for (int i = 0; i < n; ++i) {
      const double u = (s.value(t)[0] - s.value(k)[i]) / s.value(d)[i];
      near_knot = near_knot || std::abs(u - std::round(u)) < 1e-3;
    }
    if (near_knot) continue;
    const auto fn = [&](ParamStore<double>& p) {
      std::vector<double> out(n);
      eval_basis<double>(p.value(c), p.value(k), p.value(d), p.value(t)[0], out);
      p.grad(t)[0] += eval_basis_backward<double>(p.value(c), p.value(k), p.value(d), p.value(t)[0], w, p.grad(c),
                                                  p.grad(k), p.grad(d));
      double l = 0.0;
      for (int i = 0; i < n; ++i) l += w[i] * out[i];
      return l;
    };
    const auto rep = grad_check(fn, s, 1e-5, 1e-4);
    EXPECT_TRUE(rep.passed) << "seed " << seed << " err " << rep.max_rel_error;
  }
}

class MapperTest : public ::testing::Test {
 protected:
  ParamStore<double> store;
  BSplineMapper<double> mapper{store, "m", BSplineMapperConfig{4, {8, 8}, 30.0}};
  std::vector<double> z{0.1, -0.2, 0.3, 0.05};
  void SetUp() override { mapper.init(store, 3); }
};

TEST_F(MapperTest, ZeroCoefficientHeadGivesZeroMotion) {
  const auto& co = mapper.coefficient_estimator();
  const int last = co.layer_count() - 1;
  std::ranges::fill(store.value(co.weight(last)), 0.0);
  std::ranges::fill(store.value(co.bias(last)), 0.0);
  std::ranges::fill(store.value(mapper.head().bias()), 0.0);
  const auto rep = mapper.predict_rep(store, z, 0.1, -0.2, 0.5);
  for (double c : rep.coefficients) EXPECT_EQ(c, 0.0);
  const auto m = mapper.motion_at(store, rep, 0.4, 2.0, 8.0);
  EXPECT_EQ(m.dx, 0.0);
  EXPECT_EQ(m.dy, 0.0);
  EXPECT_EQ(m.reliability, 0.0);
}

TEST_F(MapperTest, Deterministic) {
  const auto a = mapper.predict_rep(store, z, 0.1, -0.2, 0.5);
  const auto b = mapper.predict_rep(store, z, 0.1, -0.2, 0.5);
  EXPECT_EQ(a.coefficients, b.coefficients);
  EXPECT_EQ(a.knots, b.knots);
  EXPECT_EQ(a.dilation, b.dilation);
}

TEST_F(MapperTest, FrameIntervalOnlyChangesDilation) {
  const auto a = mapper.predict_rep(store, z, 0.1, -0.2, 0.5);
  const auto b = mapper.predict_rep(store, z, 0.1, -0.2, 1.0);
  EXPECT_EQ(a.coefficients, b.coefficients);
  EXPECT_EQ(a.knots, b.knots);
  EXPECT_NE(a.dilation, b.dilation);
  for (double d : a.dilation) EXPECT_GE(d, kDilationFloor);
}

TEST_F(MapperTest, ZeroBasisGivesScaledHeadBias) {
  auto bias = store.value(mapper.head().bias());
  bias[0] = 0.25;
  bias[1] = -0.5;
  bias[2] = 1.5;
  BSplineMotionRep<double> rep{{1, 1, 1, 1}, {9, 9, 9, 9}, {1, 1, 1, 1}};
  const auto m = mapper.motion_at(store, rep, 0.5, 2.0, 8.0);
  EXPECT_EQ(m.dx, 0.5);
  EXPECT_EQ(m.dy, -1.0);
  EXPECT_EQ(m.reliability, 1.5);
}

TEST_F(MapperTest, MotionIsClamped) {
  store.value(mapper.head().bias())[0] = 100.0;
  BSplineMotionRep<double> rep{{1, 1, 1, 1}, {9, 9, 9, 9}, {1, 1, 1, 1}};
  EXPECT_EQ(mapper.motion_at(store, rep, 0.5, 2.0, 3.0).dx, 6.0);
}

TEST_F(MapperTest, ReuseMatchesIndependentEvaluations) {
  const auto rep = mapper.predict_rep(store, z, 0.1, -0.2, 0.5);
  for (int k = 0; k < 16; ++k) {
    const double t = k / 15.0;
    const auto reused = mapper.motion_at(store, rep, t, 2.0, 8.0);
    const auto fresh = mapper.motion_at(store, mapper.predict_rep(store, z, 0.1, -0.2, 0.5), t, 2.0, 8.0);
    EXPECT_EQ(reused.dx, fresh.dx);
    EXPECT_EQ(reused.dy, fresh.dy);
    EXPECT_EQ(reused.reliability, fresh.reliability);
  }
}

TEST_F(MapperTest, RejectsBadInput) {
  std::vector<double> short_z{1.0};
  EXPECT_THROW(mapper.predict_rep(store, short_z, 0, 0, 0.5), std::invalid_argument);
  EXPECT_THROW(mapper.predict_rep(store, z, 0, 0, 0.0), std::invalid_argument);
}
