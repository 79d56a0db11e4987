#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "bfstvsr/grad_check.hpp"
#include "bfstvsr/siren.hpp"

using namespace bfstvsr;

namespace {

template <class T>
std::vector<T> run(const Siren<T>& net, const ParamStore<T>& s, std::vector<T> x) {
  std::vector<T> y(net.output_dim());
  std::vector<T> r(net.residual_size());
  net.forward(s, x, y, r);
  return y;
}

}  // namespace

TEST(Siren, InitBoundLaterLayers) {
  ParamStore<double> s;
  const Siren<double> net(s, "n", SirenConfig{{3, 64, 64, 2}});
  EXPECT_NEAR(net.init_bound(1), 0.010206, 5e-7);
  EXPECT_NEAR(net.init_bound(1), std::sqrt(6.0 / 64.0) / 30.0, 1e-15);
  EXPECT_DOUBLE_EQ(net.init_bound(0), 1.0 / 3.0);
}

TEST(Siren, InitWithinBoundsAndDeterministic) {
  ParamStore<float> a;
  ParamStore<float> b;
  const Siren<float> na(a, "n", SirenConfig{{5, 64, 32, 4}});
  const Siren<float> nb(b, "n", SirenConfig{{5, 64, 32, 4}});
  na.init(a, 42);
  nb.init(b, 42);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a.entries()[k].value, b.entries()[k].value);
  for (int l = 0; l < na.layer_count(); ++l) {
    for (float w : a.value(na.weight(l))) EXPECT_LE(std::abs(w), na.init_bound(l));
    for (float v : a.value(na.bias(l))) EXPECT_EQ(v, 0.0f);
  }
}

TEST(Siren, ZeroParametersGiveZeroOutput) {
  ParamStore<double> s;
  const Siren<double> net(s, "n", SirenConfig{{2, 8, 3}});
  EXPECT_EQ(run(net, s, {0.4, -7.0}), (std::vector<double>{0.0, 0.0, 0.0}));
}

TEST(Siren, AffineOnlyIdentity) {
  ParamStore<double> s;
  const Siren<double> net(s, "n", SirenConfig{{2, 2}});
  auto w = s.value(net.weight(0));
  w[0] = 1.0;
  w[3] = 1.0;
  EXPECT_EQ(run(net, s, {0.25, -3.5}), (std::vector<double>{0.25, -3.5}));
}

TEST(Siren, QuarterPeriodHandExample) {
  ParamStore<double> s;
  const Siren<double> net(s, "n", SirenConfig{{1, 1, 1}});
  s.value(net.weight(0))[0] = std::numbers::pi / (2.0 * 30.0);
  s.value(net.weight(1))[0] = 1.0;
  const auto y = run(net, s, {1.0});
  EXPECT_NEAR(y[0], 1.0, 1e-15);
}

TEST(Siren, BackwardZeroUpstream) {
  ParamStore<double> s;
  const Siren<double> net(s, "n", SirenConfig{{3, 6, 2}});
  net.init(s, 1);
  std::vector<double> x{0.1, 0.2, 0.3};
  std::vector<double> y(2);
  std::vector<double> r(net.residual_size());
  net.forward(s, x, y, r);
  std::vector<double> dy(2, 0.0);
  std::vector<double> dx(3, 1.0);
  net.backward(s, r, dy, dx);
  for (double v : dx) EXPECT_EQ(v, 0.0);
  for (const auto& e : s.entries()) {
    for (double g : e.grad) EXPECT_EQ(g, 0.0);
  }
}

TEST(Siren, AffineAdjointIsTranspose) {
  ParamStore<double> s;
  const Siren<double> net(s, "n", SirenConfig{{3, 2}});
  net.init(s, 5);
  std::vector<double> x{1.0, 2.0, 3.0};
  std::vector<double> y(2);
  std::vector<double> r(net.residual_size());
  net.forward(s, x, y, r);
  std::vector<double> dy{0.5, -2.0};
  std::vector<double> dx(3);
  net.backward(s, r, dy, dx);
  const auto w = s.value(net.weight(0));
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(dx[i], w[i] * dy[0] + w[3 + i] * dy[1], 1e-15);
}

TEST(Siren, BackwardRejectsStaleResiduals) {
  ParamStore<double> s;
  const Siren<double> net(s, "n", SirenConfig{{3, 4, 2}});
  std::vector<double> r(net.residual_size() - 1);
  std::vector<double> dy(2);
  EXPECT_THROW(net.backward(s, r, dy, {}), std::invalid_argument);
  std::vector<double> y(2);
  std::vector<double> x(2);
  std::vector<double> rr(net.residual_size());
  EXPECT_THROW(net.forward(s, x, y, rr), std::invalid_argument);
}

TEST(Siren, RejectsBadConfig) {
  ParamStore<double> s;
  EXPECT_THROW(Siren<double>(s, "a", SirenConfig{{3}}), std::invalid_argument);
  EXPECT_THROW(Siren<double>(s, "b", SirenConfig{{3, 0, 2}}), std::invalid_argument);
}

TEST(Siren, GradCheckRandomNet) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ParamStore<double> s;
    const Siren<double> net(s, "n", SirenConfig{{3, 5, 4, 2}});
    net.init(s, seed);
    const auto xid = s.add("x", {3});
    Rng rng(seed + 100);
    for (auto& v : s.value(xid)) v = rng.uniform(-1.0, 1.0);
    for (int l = 0; l < net.layer_count(); ++l) {
      for (auto& b : s.value(net.bias(l))) b = rng.uniform(-0.1, 0.1);
    }
    const std::vector<double> wy{0.3, -0.7};
    const auto fn = [&](ParamStore<double>& p) {
      std::vector<double> x(p.value(xid).begin(), p.value(xid).end());
      std::vector<double> y(2);
      std::vector<double> r(net.residual_size());
      net.forward(p, x, y, r);
      std::vector<double> dx(3);
      net.backward(p, r, wy, dx);
      for (int i = 0; i < 3; ++i) p.grad(xid)[i] += dx[i];
      return wy[0] * y[0] + wy[1] * y[1];
    };
    const auto rep = grad_check(fn, s, 1e-5, 1e-4);
    EXPECT_TRUE(rep.passed) << "seed " << seed << " err " << rep.max_rel_error;
  }
}

TEST(Linear, ForwardAndAdjoint) {
  ParamStore<double> s;
  const Linear<double> lin(s, "l", 2, 2);
  auto w = s.value(lin.weight());
  w[0] = 1.0;
  w[1] = 2.0;
  w[2] = 3.0;
  w[3] = 4.0;
  s.value(lin.bias())[1] = 0.5;
  std::vector<double> x{1.0, -1.0};
  std::vector<double> y(2);
  lin.forward(s, x, y);
  EXPECT_EQ(y, (std::vector<double>{-1.0, -0.5}));
  std::vector<double> dy{1.0, 1.0};
  std::vector<double> dx(2);
  lin.backward(s, x, dy, dx);
  EXPECT_EQ(dx, (std::vector<double>{4.0, 6.0}));
  EXPECT_EQ(s.grad(lin.bias())[0], 1.0);
}
