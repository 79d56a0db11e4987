#pragma once

// Property suites shared by `bfstvsr verify` and the acceptance binary. Each
// check is named so a failure points at the broken invariant.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bfstvsr/bspline.hpp"
#include "bfstvsr/checkpoint.hpp"
#include "bfstvsr/fourier.hpp"
#include "bfstvsr/grad_check.hpp"
#include "bfstvsr/metrics.hpp"
#include "bfstvsr/pipeline.hpp"
#include "bfstvsr/rng.hpp"
#include "bfstvsr/siren.hpp"
#include "bfstvsr/splatting.hpp"
#include "bfstvsr/synthetic.hpp"

namespace bfstvsr {

struct CheckResult {
  std::string suite;
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  bool corrupt_bspline = false;  // mutation fixture: perturbs the centre constant of beta3
  int gradcheck_seeds = 20;
  double gradcheck_h = 1e-5;
  double gradcheck_tol = 1e-4;
};

inline const std::vector<std::string>& verify_suite_names() {
  static const std::vector<std::string> names{"bspline", "fourier", "splat", "gradcheck", "metrics", "pipeline"};
  return names;
}

namespace verify_detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// beta3 with the centre constant 4/6 replaced by 4.02/6.
inline double mutant_bspline3(double x) {
  if (x > -1.0 && x <= 1.0) return (4.02 - 6.0 * x * x + 3.0 * std::abs(x) * x * x) / 6.0;
  return bspline3(x);
}

class Collector {
 public:
  explicit Collector(std::string suite) : suite_(std::move(suite)) {}
  void check(const std::string& name, bool ok, const std::string& detail = {}) {
    out_.push_back({suite_, name, ok, detail});
  }
  std::vector<CheckResult> take() { return std::move(out_); }

 private:
  std::string suite_;
  std::vector<CheckResult> out_;
};

}  // namespace verify_detail

inline std::vector<CheckResult> verify_bspline(const VerifyOptions& opt = {}) {
  using verify_detail::fmt;
  verify_detail::Collector col("bspline");
  const auto kernel = opt.corrupt_bspline ? verify_detail::mutant_bspline3 : bspline3;

  struct Point {
    double x;
    double expected;
  };
  const Point table[] = {{-2.0, 0.0},       {-1.5, 1.0 / 48.0}, {-1.0, 1.0 / 6.0}, {0.0, 2.0 / 3.0},
                         {1.0, 1.0 / 6.0},  {1.5, 1.0 / 48.0},  {2.0, 0.0}};
  double worst = 0.0;
  double worst_x = 0.0;
  for (const auto& p : table) {
    const double err = std::abs(kernel(p.x) - p.expected);
    if (err > worst) {
      worst = err;
      worst_x = p.x;
    }
  }
  col.check("bspline3_exact_values", worst <= 1e-12, "max error " + fmt(worst) + " at x=" + fmt(worst_x));

  Rng rng(7);
  double pou = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(-10.0, 10.0);
    double sum = 0.0;
    for (int k = static_cast<int>(std::floor(x)) - 3; k <= static_cast<int>(std::floor(x)) + 3; ++k) sum += kernel(x - k);
    pou = std::max(pou, std::abs(sum - 1.0));
  }
  col.check("partition_of_unity", pou <= 1e-12, "max |sum - 1| = " + fmt(pou));

  double worst_rel = 0.0;
  const double h = 1e-6;
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(-2.5, 2.5);
    const double frac = x - std::round(x);
    if (std::abs(frac) < 1e-3) continue;  // stay away from knots
    const double numeric = (kernel(x + h) - kernel(x - h)) / (2.0 * h);
    const double analytic = bspline3_deriv(x);
    // Outside the support both are exactly zero.
    if (analytic == 0.0 && numeric == 0.0) continue;
    worst_rel = std::max(worst_rel, std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-3}));
  }
  col.check("derivative_matches_central_differences", worst_rel < 1e-6, "max rel err " + fmt(worst_rel));

  const double mirror = std::abs(kernel(0.3) - kernel(-0.3)) + std::abs(kernel(1.7) - kernel(-1.7));
  col.check("symmetric", mirror <= 1e-15, "asymmetry " + fmt(mirror));
  return col.take();
}

inline std::vector<CheckResult> verify_fourier(const VerifyOptions& = {}) {
  using verify_detail::fmt;
  verify_detail::Collector col("fourier");
  Rng rng(11);
  const int c = 8;
  double zero_delta_err = 0.0;
  double pythagoras_err = 0.0;
  double bound_violation = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> amp(2 * c);
    std::vector<double> freq(2 * c);
    for (auto& a : amp) a = rng.uniform(-2.0, 2.0);
    for (auto& f : freq) f = rng.uniform(-4.0, 4.0);
    std::vector<double> out(2 * c);
    fourier_features<double>(amp, freq, 0.0, 0.0, out);
    for (int i = 0; i < c; ++i) {
      zero_delta_err = std::max(zero_delta_err, std::abs(out[i] - amp[i]));
      zero_delta_err = std::max(zero_delta_err, std::abs(out[c + i]));
    }
    // Equal cos/sin amplitudes trace a circle of radius |A_i|.
    for (int i = 0; i < c; ++i) amp[c + i] = amp[i];
    const double dx = rng.uniform(-0.5, 0.5);
    const double dy = rng.uniform(-0.5, 0.5);
    fourier_features<double>(amp, freq, dx, dy, out);
    for (int i = 0; i < c; ++i) {
      const double r2 = out[i] * out[i] + out[c + i] * out[c + i];
      pythagoras_err = std::max(pythagoras_err, std::abs(r2 - amp[i] * amp[i]));
      bound_violation = std::max(bound_violation, std::abs(out[i]) - std::abs(amp[i]));
    }
  }
  col.check("zero_offset_gives_cos_block", zero_delta_err <= 1e-6, "max error " + fmt(zero_delta_err));
  col.check("cos2_plus_sin2_amplitude_identity", pythagoras_err <= 1e-6, "max error " + fmt(pythagoras_err));
  col.check("output_bounded_by_amplitude", bound_violation <= 1e-12, "max excess " + fmt(bound_violation));

  {
    std::vector<double> amp(2, 1.0);
    std::vector<double> freq{1.0, 0.0};
    std::vector<double> out(2);
    fourier_features<double>(amp, freq, 0.5, 0.0, out);
    col.check("quarter_period_hand_value", std::abs(out[0]) < 1e-12 && std::abs(out[1] - 1.0) < 1e-12,
              "got (" + fmt(out[0]) + ", " + fmt(out[1]) + ")");
  }

  // The representation is a function of z alone: estimating it before and
  // after queries at different offsets gives bit-identical amplitudes and
  // frequencies, and a query grid at s = 1 only ever sees zero offsets.
  ParamStore<double> store;
  FourierMapper<double> mapper(store, "fourier", FourierMapperConfig{c, {16, 16}, 30.0});
  mapper.init(store, 5);
  std::vector<double> z(c);
  for (auto& v : z) v = rng.uniform(-1.0, 1.0);
  const auto rep_a = mapper.estimate_rep(store, z);
  bool independent = true;
  for (double d : {-0.5, -0.1, 0.2, 0.49}) {
    (void)mapper.feature_at(store, z, d, -d);
    const auto rep_b = mapper.estimate_rep(store, z);
    independent = independent && rep_b.amplitudes == rep_a.amplitudes && rep_b.frequencies == rep_a.frequencies;
  }
  col.check("rep_independent_of_offset", independent);

  const auto f1 = mapper.feature_at(store, rep_a, 0.1, 0.2);
  const auto f2 = mapper.feature_at(store, rep_a, 0.1 + 1e-6, 0.2);
  double cont = 0.0;
  for (int k = 0; k < c; ++k) cont = std::max(cont, std::abs(f1[k] - f2[k]));
  col.check("feature_continuous_in_offset", cont < 1e-3, "max jump " + fmt(cont));

  const auto queries = make_query_grid(4, 5, 1.0);
  double max_delta = 0.0;
  for (const auto& q : queries) {
    const auto lk = nearest_cell(q, 4, 5);
    max_delta = std::max({max_delta, std::abs(lk.delta_x), std::abs(lk.delta_y)});
  }
  col.check("unit_scale_queries_have_zero_offset", max_delta == 0.0, "max |delta| " + fmt(max_delta));
  return col.take();
}

inline std::vector<CheckResult> verify_splat(const VerifyOptions& = {}) {
  using verify_detail::fmt;
  verify_detail::Collector col("splat");
  Rng rng(13);
  const auto random_grid = [&](int c, int h, int w, double lo, double hi) {
    FeatureGrid<double> g(c, h, w);
    for (auto& v : g.data()) v = rng.uniform(lo, hi);
    return g;
  };

  {
    const auto f = random_grid(3, 9, 11, -1.0, 1.0);
    FeatureGrid<double> m(2, 9, 11);
    FeatureGrid<double> z(1, 9, 11, 0.7);
    const auto r = splat_forward(f, m, z);
    double err = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) err = std::max(err, std::abs(r.features.data()[i] - f.data()[i]));
    const bool no_holes = std::ranges::none_of(r.hole_mask, [](std::uint8_t b) { return b != 0; });
    col.check("zero_flow_identity", err <= 1e-6 && no_holes, "max error " + fmt(err));
  }

  {
    double err = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const auto f = random_grid(2, 8, 8, -1.0, 1.0);
      const auto m = random_grid(2, 8, 8, -2.0, 2.0);
      auto z = random_grid(1, 8, 8, -3.0, 3.0);
      const auto a = splat_forward(f, m, z);
      for (auto& v : z.data()) v += 5.0;
      const auto b = splat_forward(f, m, z);
      for (std::size_t i = 0; i < a.features.size(); ++i) {
        err = std::max(err, std::abs(a.features.data()[i] - b.features.data()[i]));
      }
    }
    col.check("logit_shift_invariance", err <= 1e-6, "max change " + fmt(err));
  }

  {
    int violations = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const int c = 3;
      const auto f = random_grid(c, 7, 9, -1.0, 2.0);
      const auto m = random_grid(2, 7, 9, -3.0, 3.0);
      const auto z = random_grid(1, 7, 9, -4.0, 4.0);
      const auto r = splat_forward(f, m, z);
      for (int k = 0; k < c; ++k) {
        const auto plane = f.plane(k);
        const double lo = *std::ranges::min_element(plane);
        const double hi = *std::ranges::max_element(plane);
        const auto out = r.features.plane(k);
        for (std::size_t p = 0; p < out.size(); ++p) {
          if (r.hole_mask[p]) continue;
          if (out[p] < lo - 1e-9 || out[p] > hi + 1e-9) ++violations;
        }
      }
    }
    col.check("convex_combination_bound", violations == 0, std::to_string(violations) + " violations in 100 instances");
  }

  {
    FeatureGrid<double> f(1, 3, 4);
    f(0, 1, 1) = 0.8;
    FeatureGrid<double> m(2, 3, 4);
    m(0, 1, 1) = 0.5;
    FeatureGrid<double> z(1, 3, 4);
    const auto r = splat_forward(f, m, z);
    // (1,1) is vacated and fed only by the moved pixel.
    const double expect_left = 0.8 * 0.5 / (0.5 + kSplatEps);
    col.check("half_pixel_split_normalizes", std::abs(r.features(0, 1, 1) - expect_left) < 1e-6,
              "got " + fmt(r.features(0, 1, 1)));
  }

  {
    FeatureGrid<double> f(1, 4, 4, 1.0);
    FeatureGrid<double> m(2, 4, 4, 50.0);
    FeatureGrid<double> z(1, 4, 4);
    const auto r = splat_forward(f, m, z);
    const bool all_holes = std::ranges::all_of(r.hole_mask, [](std::uint8_t b) { return b != 0; });
    const bool zeros = std::ranges::all_of(r.features.data(), [](double v) { return v == 0.0; });
    col.check("off_grid_flow_gives_holes", all_holes && zeros);
  }
  return col.take();
}

// ---- gradient checks --------------------------------------------------------

struct GradCheckSummary {
  std::string target;
  int seeds = 0;
  int failures = 0;
  double max_rel_error = 0.0;
  std::string worst;
};

namespace verify_detail {

// Keeps |L| near 1e-2 so double roundoff in the central difference,
// about eps |L| / h, stays well under the 1e-8 relative-error floor.
inline constexpr double kLossScale = 1e-2;

inline std::vector<double> random_vector(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

/// True if any splat target of `ex` lies within `margin` of a cell boundary.
inline bool near_cell_boundary(const Model<double>& model, const TrainExample<double>& ex, double margin) {
  const auto p = model.prepare(ex.frame0, ex.frame1, ex.scale);
  const auto close = [margin](double v) { return std::abs(v - std::round(v)) < margin; };
  for (const auto& target : ex.targets) {
    for (int r = 0; r < 2; ++r) {
      FeatureGrid<double> motion;
      FeatureGrid<double> logits;
      model.motion_fields(p, r, target.t, motion, logits);
      const auto& m = target.substitute[r] ? (*target.oracle_flows)[r] : motion;
      for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
          if (close(x + m(0, y, x)) || close(y + m(1, y, x))) return true;
        }
      }
    }
  }
  return false;
}

inline void absorb(GradCheckSummary& s, const GradCheckReport& r) {
  ++s.seeds;
  if (!r.passed) ++s.failures;
  if (r.max_rel_error >= s.max_rel_error) {
    s.max_rel_error = r.max_rel_error;
    if (const auto* w = r.worst()) s.worst = w->name + "[" + std::to_string(w->worst_index) + "]";
  }
}

}  // namespace verify_detail

inline GradCheckReport gradcheck_siren(std::uint64_t seed, double h, double tol) {
  Rng rng(mix_seed(seed, 101));
  ParamStore<double> store;
  SirenConfig cfg;
  cfg.layer_dims = {5, 12, 12, 4};
  Siren<double> net(store, "siren", cfg);
  net.init(store, seed);
  for (auto& e : store.entries()) {
    if (e.name.ends_with("bias")) {
      for (auto& b : e.value) b = rng.uniform(-0.1, 0.1);
    }
  }
  const auto x = verify_detail::random_vector(rng, 5);
  const auto w = verify_detail::random_vector(rng, 4, -verify_detail::kLossScale, verify_detail::kLossScale);
  std::vector<double> residual(net.residual_size());
  std::vector<double> y(4);
  return grad_check(
      [&](ParamStore<double>& p) {
        net.forward(p, x, y, residual);
        net.backward(p, residual, w, {});
        double l = 0.0;
        for (int i = 0; i < 4; ++i) l += w[i] * y[i];
        return l;
      },
      store, h, tol);
}

inline GradCheckReport gradcheck_decoder(std::uint64_t seed, double h, double tol) {
  Rng rng(mix_seed(seed, 102));
  ModelConfig mc;
  mc.channels = 8;
  mc.mapper_hidden = {8, 8};
  mc.decoder_hidden = 16;
  mc.seed = seed;
  Model<double> model(mc);
  // Check only the decoder's parameters.
  ParamStore<double> store;
  Siren<double> net(store, "decoder", model.decoder().config());
  for (auto& e : store.entries()) {
    const auto id = model.params().find(e.name);
    e.value = model.params().entry(*id).value;
  }
  auto x = verify_detail::random_vector(rng, 2 * mc.channels + 1);
  x.back() = rng.uniform(0.0, 1.0);
  const auto w = verify_detail::random_vector(rng, 3, -verify_detail::kLossScale, verify_detail::kLossScale);
  std::vector<double> residual(net.residual_size());
  std::vector<double> y(3);
  return grad_check(
      [&](ParamStore<double>& p) {
        net.forward(p, x, y, residual);
        net.backward(p, residual, w, {});
        return w[0] * y[0] + w[1] * y[1] + w[2] * y[2];
      },
      store, h, tol);
}

inline GradCheckReport gradcheck_bspline_mapper(std::uint64_t seed, double h, double tol) {
  Rng rng(mix_seed(seed, 103));
  const int c = 8;
  ParamStore<double> store;
  BSplineMapper<double> mapper(store, "bspline", BSplineMapperConfig{c, {12, 12}, 30.0});
  mapper.init(store, seed);
  struct Query {
    std::vector<double> z;
    double dx, dy, t_hat, w0, w1, w2;
  };
  std::vector<Query> queries;
  for (int q = 0; q < 3; ++q) {
    queries.push_back({verify_detail::random_vector(rng, c), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                       rng.uniform(0.0, 1.0), verify_detail::kLossScale * rng.uniform(-1.0, 1.0),
                       verify_detail::kLossScale * rng.uniform(-1.0, 1.0), verify_detail::kLossScale * rng.uniform(-1.0, 1.0)});
  }
  const double scale = 2.5;
  const double max_disp = 1e6;  // keep the clamp inactive
  const double g = 1.0;
  return grad_check(
      [&](ParamStore<double>& p) {
        double l = 0.0;
        const auto dil = mapper.dilation(p, g);
        for (const auto& q : queries) {
          BSplineMotionRep<double> rep;
          std::vector<double> residual(mapper.residual_size());
          mapper.predict_rep(p, q.z, q.dx, q.dy, dil, rep, residual);
          const auto m = mapper.motion_at(p, rep, q.t_hat, scale, max_disp);
          l += q.w0 * m.dx + q.w1 * m.dy + q.w2 * m.reliability;
          std::vector<double> dz(c, 0.0);
          mapper.backward(p, rep, residual, q.t_hat, scale, max_disp, MotionSample<double>{q.w0, q.w1, q.w2}, g, dz);
        }
        return l;
      },
      store, h, tol);
}

inline GradCheckReport gradcheck_fourier_mapper(std::uint64_t seed, double h, double tol) {
  Rng rng(mix_seed(seed, 104));
  const int c = 6;
  ParamStore<double> store;
  FourierMapper<double> mapper(store, "fourier", FourierMapperConfig{c, {10, 10}, 30.0});
  mapper.init(store, seed);
  FeatureGrid<double> latent(c, 3, 3);
  for (auto& v : latent.data()) v = rng.uniform(-1.0, 1.0);
  const auto queries = make_query_grid(3, 3, 1.7);
  std::vector<std::vector<double>> weights;
  for (std::size_t i = 0; i < queries.size(); ++i) weights.push_back(verify_detail::random_vector(rng, c, -verify_detail::kLossScale, verify_detail::kLossScale));
  return grad_check(
      [&](ParamStore<double>& p) {
        FourierFieldResiduals<double> res;
        const auto field = mapper.estimate_field(p, latent, &res);
        FourierField<double> d_field{FeatureGrid<double>(2 * c, 3, 3), FeatureGrid<double>(2 * c, 3, 3)};
        std::vector<double> out(c);
        std::vector<double> emb(2 * c);
        double l = 0.0;
        for (std::size_t i = 0; i < queries.size(); ++i) {
          const auto lk = nearest_cell(queries[i], 3, 3);
          mapper.query_feature(p, field, lk.cell_x, lk.cell_y, lk.delta_x, lk.delta_y, out, emb);
          for (int k = 0; k < c; ++k) l += weights[i][k] * out[k];
          mapper.query_backward(p, field, lk.cell_x, lk.cell_y, lk.delta_x, lk.delta_y, emb, weights[i], d_field);
        }
        mapper.field_backward(p, latent, res, d_field);
        return l;
      },
      store, h, tol);
}

/// Splat inputs are the "parameters"; loss is a random linear functional of
/// the warped features and reliability.
inline GradCheckReport gradcheck_splatting(std::uint64_t seed, double h, double tol) {
  Rng rng(mix_seed(seed, 105));
  const int c = 2;
  const int hh = 5;
  const int ww = 6;
  ParamStore<double> store;
  const auto fid = store.add("features", {static_cast<std::size_t>(c), hh, ww});
  const auto mid = store.add("motion", {2, hh, ww});
  const auto zid = store.add("logits", {1, hh, ww});
  for (auto& v : store.value(fid)) v = rng.uniform(-1.0, 1.0);
  for (auto& v : store.value(zid)) v = rng.uniform(-1.0, 1.0);
  // Keep every target away from cell boundaries, where bilinear weights kink.
  for (auto& v : store.value(mid)) {
    double m;
    do {
      m = rng.uniform(-1.5, 1.5);
    } while (std::abs(m - std::round(m)) < 1e-3);
    v = m;
  }
  FeatureGrid<double> wf(c, hh, ww);
  FeatureGrid<double> wz(1, hh, ww);
  for (auto& v : wf.data()) v = verify_detail::kLossScale * rng.uniform(-1.0, 1.0);
  for (auto& v : wz.data()) v = verify_detail::kLossScale * rng.uniform(-1.0, 1.0);
  return grad_check(
      [&](ParamStore<double>& p) {
        const auto vf = p.value(fid);
        const auto vm = p.value(mid);
        const auto vz = p.value(zid);
        const FeatureGrid<double> f(c, hh, ww, std::vector<double>(vf.begin(), vf.end()));
        const FeatureGrid<double> m(2, hh, ww, std::vector<double>(vm.begin(), vm.end()));
        const FeatureGrid<double> z(1, hh, ww, std::vector<double>(vz.begin(), vz.end()));
        const auto r = splat_forward(f, m, z);
        double l = 0.0;
        for (std::size_t i = 0; i < wf.size(); ++i) l += wf.data()[i] * r.features.data()[i];
        for (std::size_t i = 0; i < wz.size(); ++i) l += wz.data()[i] * r.reliability.data()[i];
        const auto g = splat_backward(f, m, z, r, wf, &wz, static_cast<const FeatureGrid<double>*>(nullptr));
        auto gf = p.grad(fid);
        auto gm = p.grad(mid);
        auto gz = p.grad(zid);
        for (std::size_t i = 0; i < gf.size(); ++i) gf[i] += g.d_features.data()[i];
        for (std::size_t i = 0; i < gm.size(); ++i) gm[i] += g.d_motion.data()[i];
        for (std::size_t i = 0; i < gz.size(); ++i) gz[i] += g.d_logits.data()[i];
        return l;
      },
      store, h, tol);
}

/// Small model configuration used by the full-pipeline gradient check.
inline ModelConfig gradcheck_model_config(std::uint64_t seed) {
  ModelConfig mc;
  mc.channels = 8;
  mc.mapper_hidden = {8, 8};
  mc.decoder_hidden = 8;
  mc.seed = seed;
  return mc;
}

/// Training example on a 4x4 clip at s = 1.5 with two targets, one of which
/// splats reference 0 with the oracle motion.
inline TrainExample<double> gradcheck_example(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 106));
  auto spec = random_clip_spec(rng, 4, 4, 3, 1.0, 3);
  TrainExample<double> ex;
  ex.scale = 1.5;
  ex.frame0 = render_frame<double>(spec, 0.0);
  ex.frame1 = render_frame<double>(spec, 1.0);
  for (int k = 0; k < 2; ++k) {
    TrainTarget<double> t;
    t.t = rng.uniform(0.1, 0.9);
    t.frame = render_frame<double>(spec, t.t, ex.scale);
    t.oracle_flows = std::array<FeatureGrid<double>, 2>{oracle_flow<double>(spec, 0, t.t, ex.scale),
                                                        oracle_flow<double>(spec, 1, t.t, ex.scale)};
    t.substitute = {k == 1, false};
    ex.targets.push_back(std::move(t));
  }
  return ex;
}

/// Untrained motion is near zero, which parks splat targets on the integer
/// lattice where bilinear weights kink; the head bias offset moves them off.
/// Any remaining target within 1e-3 of a cell boundary re-samples the offset.
inline GradCheckReport gradcheck_pipeline(std::uint64_t seed, double h, double tol) {
  Model<double> model(gradcheck_model_config(seed));
  const auto ex = gradcheck_example(seed);
  auto bias = model.params().value(*model.params().find("bspline/head/bias"));
  const std::array<double, 2> init{bias[0], bias[1]};
  Rng rng(mix_seed(seed, 107));
  for (int attempt = 0;; ++attempt) {
    if (attempt == 100) throw std::runtime_error("gradcheck_pipeline: no collision-free motion offset found");
    bias[0] = init[0] + rng.uniform(0.2, 0.4);
    bias[1] = init[1] + rng.uniform(0.2, 0.4);
    if (!verify_detail::near_cell_boundary(model, ex, 1e-3)) break;
  }
  LossOptions opt;
  opt.lambda = 0.01;
  opt.weight = verify_detail::kLossScale;
  return grad_check([&](ParamStore<double>&) { return model.loss_and_grad(ex, opt).total; },
                    [&](ParamStore<double>&) { return model.loss(ex, opt).total; }, model.params(), h, tol);
}

inline const std::vector<std::pair<std::string, GradCheckReport (*)(std::uint64_t, double, double)>>&
gradcheck_targets() {
  static const std::vector<std::pair<std::string, GradCheckReport (*)(std::uint64_t, double, double)>> targets{
      {"siren", gradcheck_siren},
      {"bspline_mapper", gradcheck_bspline_mapper},
      {"fourier_mapper", gradcheck_fourier_mapper},
      {"splatting", gradcheck_splatting},
      {"decoder", gradcheck_decoder},
      {"pipeline", gradcheck_pipeline}};
  return targets;
}

inline GradCheckSummary run_gradcheck(const std::string& target, const VerifyOptions& opt) {
  for (const auto& [name, fn] : gradcheck_targets()) {
    if (name != target) continue;
    GradCheckSummary s;
    s.target = name;
    for (int seed = 1; seed <= opt.gradcheck_seeds; ++seed) {
      verify_detail::absorb(s, fn(static_cast<std::uint64_t>(seed), opt.gradcheck_h, opt.gradcheck_tol));
    }
    return s;
  }
  throw std::invalid_argument("unknown gradcheck target '" + target + "'");
}

inline std::vector<CheckResult> verify_gradcheck(const VerifyOptions& opt = {}) {
  verify_detail::Collector col("gradcheck");
  for (const auto& [name, fn] : gradcheck_targets()) {
    const auto s = run_gradcheck(name, opt);
    col.check(name, s.failures == 0,
              std::to_string(s.seeds - s.failures) + "/" + std::to_string(s.seeds) + " seeds pass, max rel err " +
                  verify_detail::fmt(s.max_rel_error) + (s.worst.empty() ? "" : " at " + s.worst));
  }
  return col.take();
}

inline std::vector<CheckResult> verify_metrics(const VerifyOptions& = {}) {
  using verify_detail::fmt;
  verify_detail::Collector col("metrics");
  FeatureGrid<double> black(3, 1, 1, 0.0);
  FeatureGrid<double> white(3, 1, 1, 1.0);
  col.check("y_of_black", std::abs(rgb_to_y(black)(0, 0, 0) - 16.0 / 255.0) < 1e-12);
  col.check("y_of_white", std::abs(rgb_to_y(white)(0, 0, 0) - 235.0 / 255.0) < 1e-12);

  FeatureGrid<double> a(1, 16, 16);
  Rng rng(17);
  for (auto& v : a.data()) v = rng.uniform(0.2, 0.8);
  auto b = a;
  for (auto& v : b.data()) v += 0.1;
  col.check("psnr_identical_is_capped", psnr(a, a) == kPsnrCap);
  col.check("psnr_uniform_error_0p1", std::abs(psnr(a, b) - 20.0) < 1e-9, "got " + fmt(psnr(a, b)));
  col.check("ssim_identical_is_one", ssim(a, a) == 1.0, "got " + fmt(ssim(a, a)));

  FeatureGrid<double> checker(1, 16, 16);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) checker(0, y, x) = (x + y) % 2;
  }
  auto inverted = checker;
  for (auto& v : inverted.data()) v = 1.0 - v;
  col.check("ssim_inverted_checkerboard_low", ssim(checker, inverted) < 0.1, "got " + fmt(ssim(checker, inverted)));
  col.check("ssim_symmetric", std::abs(ssim(a, b) - ssim(b, a)) < 1e-12, "diff " + fmt(std::abs(ssim(a, b) - ssim(b, a))));
  return col.take();
}

/// Pipeline contracts: determinism, shapes, reuse equivalence, range.
inline std::vector<CheckResult> verify_pipeline(const VerifyOptions& = {}) {
  verify_detail::Collector col("pipeline");
  ModelConfig mc;
  mc.channels = 8;
  mc.mapper_hidden = {16, 16};
  mc.decoder_hidden = 16;
  Model<float> model(mc);
  Rng rng(19);
  auto spec = random_clip_spec(rng, 6, 7, 3, 1.5);
  const auto f0 = render_frame<float>(spec, 0.0);
  const auto f1 = render_frame<float>(spec, 1.0);
  const std::vector<double> times{0.0, 0.3, 0.5, 1.0};
  const auto seq = model.interpolate_sequence(f0, f1, times, 2.0);
  bool equal = true;
  for (std::size_t k = 0; k < times.size(); ++k) equal = equal && seq[k] == model.interpolate_frame(f0, f1, times[k], 2.0);
  col.check("sequence_bit_equals_per_frame", equal);
  col.check("output_shape_scales", seq[0].height() == 12 && seq[0].width() == 14);
  bool in_range = true;
  for (const auto& f : seq) {
    for (float v : f.data()) in_range = in_range && v >= 0.0f && v <= 1.0f;
  }
  col.check("output_in_unit_range", in_range);
  model.set_threads(3);
  col.check("thread_count_invariant", model.interpolate_frame(f0, f1, 0.3, 2.0) == seq[1]);
  const auto before = model.predict_rep_calls();
  (void)model.interpolate_sequence(f0, f1, std::vector<double>(8, 0.5), 2.0);
  col.check("one_rep_prediction_per_sequence", model.predict_rep_calls() - before == 1);
  const auto a = model.encode(f0, f0);
  col.check("identical_inputs_identical_latents", a.f0 == a.f1);
  return col.take();
}

inline std::vector<CheckResult> run_verify_suite(const std::string& name, const VerifyOptions& opt = {}) {
  if (name == "bspline") return verify_bspline(opt);
  if (name == "fourier") return verify_fourier(opt);
  if (name == "splat") return verify_splat(opt);
  if (name == "gradcheck") return verify_gradcheck(opt);
  if (name == "metrics") return verify_metrics(opt);
  if (name == "pipeline") return verify_pipeline(opt);
  throw std::invalid_argument("unknown suite '" + name + "'");
}

}  // namespace bfstvsr
