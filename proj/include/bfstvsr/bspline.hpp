#pragma once

// Cubic B-spline kernels and the temporal motion mapper built on them.
//
// The mapper turns a latent vector z_r and sub-cell offset delta_r into a
// per-query spline representation (coefficients, knots, dilations). Motion at
// any relative time t_hat is then one basis evaluation plus an affine head,
// so the representation is computed once and reused across timesteps.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bfstvsr/param_store.hpp"
#include "bfstvsr/rng.hpp"
#include "bfstvsr/siren.hpp"

namespace bfstvsr {

/// Cubic B-spline, support (-2, 2]. Pieces are left-open, right-closed.
inline double bspline3(double x) {
  if (x <= -2.0) return 0.0;
  if (x <= -1.0) {
    const double a = 2.0 + x;
    return a * a * a / 6.0;
  }
  if (x <= 0.0) return (4.0 - 6.0 * x * x - 3.0 * x * x * x) / 6.0;
  if (x <= 1.0) return (4.0 - 6.0 * x * x + 3.0 * x * x * x) / 6.0;
  if (x <= 2.0) {
    const double a = 2.0 - x;
    return a * a * a / 6.0;
  }
  return 0.0;
}

inline double bspline3_deriv(double x) {
  if (x <= -2.0) return 0.0;
  if (x <= -1.0) {
    const double a = 2.0 + x;
    return 0.5 * a * a;
  }
  if (x <= 0.0) return -2.0 * x - 1.5 * x * x;
  if (x <= 1.0) return -2.0 * x + 1.5 * x * x;
  if (x <= 2.0) {
    const double a = 2.0 - x;
    return -0.5 * a * a;
  }
  return 0.0;
}

inline double softplus(double x) { return x > 20.0 ? x : std::log1p(std::exp(x)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline constexpr double kDilationFloor = 1e-3;

/// Per-query spline parameters; each vector has one entry per latent channel.
template <class T>
struct BSplineMotionRep {
  std::vector<T> coefficients;
  std::vector<T> knots;
  std::vector<T> dilation;
};

template <class T>
struct MotionSample {
  T dx = 0;           // high-resolution pixels
  T dy = 0;
  T reliability = 0;  // splatting logit
};

/// c (.) beta3((t_hat - k) / d), elementwise.
template <class T>
void eval_basis(std::span<const T> coef, std::span<const T> knot, std::span<const T> dil, double t_hat,
                std::span<T> out) {
  for (std::size_t i = 0; i < coef.size(); ++i) {
    const double u = (t_hat - knot[i]) / dil[i];
    out[i] = static_cast<T>(coef[i] * bspline3(u));
  }
}

template <class T>
std::vector<T> eval_basis(const BSplineMotionRep<T>& rep, double t_hat) {
  std::vector<T> out(rep.coefficients.size());
  eval_basis<T>(rep.coefficients, rep.knots, rep.dilation, t_hat, out);
  return out;
}

/// Adjoint of eval_basis for one upstream gradient.
template <class T>
struct BasisGradient {
  std::vector<T> d_coefficients;
  std::vector<T> d_knots;
  std::vector<T> d_dilation;
  double d_t_hat = 0.0;
};

/// Adds the adjoint of eval_basis into the coefficient/knot/dilation
/// accumulators; returns dL/dt_hat.
template <class T>
double eval_basis_backward(std::span<const T> coef, std::span<const T> knot, std::span<const T> dil, double t_hat,
                           std::span<const T> d_out, std::span<T> d_coef, std::span<T> d_knot, std::span<T> d_dil) {
  double d_t = 0.0;
  for (std::size_t i = 0; i < coef.size(); ++i) {
    const double d = dil[i];
    const double u = (t_hat - knot[i]) / d;
    const double du = d_out[i] * coef[i] * bspline3_deriv(u);
    d_coef[i] += static_cast<T>(d_out[i] * bspline3(u));
    d_knot[i] += static_cast<T>(-du / d);
    d_dil[i] += static_cast<T>(-du * u / d);
    d_t += du / d;
  }
  return d_t;
}

template <class T>
BasisGradient<T> eval_basis_backward(const BSplineMotionRep<T>& rep, double t_hat, std::span<const T> d_out) {
  const std::size_t n = rep.coefficients.size();
  BasisGradient<T> g{std::vector<T>(n, T(0)), std::vector<T>(n, T(0)), std::vector<T>(n, T(0)), 0.0};
  g.d_t_hat = eval_basis_backward<T>(rep.coefficients, rep.knots, rep.dilation, t_hat, d_out, g.d_coefficients,
                                     g.d_knots, g.d_dilation);
  return g;
}

struct BSplineMapperConfig {
  int channels = 16;
  std::vector<int> hidden = {32, 32, 32};
  double omega0 = 30.0;
};

/// Estimators p_c, p_k (SIREN trunks on [z_r, delta_r]), p_d (affine on the
/// frame interval, softplus-constrained) and the motion head f_theta_b.
template <class T>
class BSplineMapper {
 public:
  static constexpr int kHeadOutputs = 3;  // (dx, dy, reliability logit)

  BSplineMapper() = default;

  BSplineMapper(ParamStore<T>& store, const std::string& prefix, BSplineMapperConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.channels <= 0) throw std::invalid_argument("BSplineMapper: channels must be positive");
    SirenConfig trunk;
    trunk.layer_dims.push_back(cfg_.channels + 2);
    trunk.layer_dims.insert(trunk.layer_dims.end(), cfg_.hidden.begin(), cfg_.hidden.end());
    trunk.layer_dims.push_back(cfg_.channels);
    trunk.omega0 = trunk.omega_hidden = cfg_.omega0;
    coefficient_ = Siren<T>(store, prefix + "/coefficient", trunk);
    knot_ = Siren<T>(store, prefix + "/knot", trunk);
    dilation_ = Linear<T>(store, prefix + "/dilation", 1, cfg_.channels);
    head_ = Linear<T>(store, prefix + "/head", cfg_.channels, kHeadOutputs);
  }

  const BSplineMapperConfig& config() const { return cfg_; }
  int channels() const { return cfg_.channels; }
  const Siren<T>& coefficient_estimator() const { return coefficient_; }
  const Siren<T>& knot_estimator() const { return knot_; }
  const Linear<T>& dilation_estimator() const { return dilation_; }
  const Linear<T>& head() const { return head_; }

  void init(ParamStore<T>& store, std::uint64_t seed) const {
    coefficient_.init(store, mix_seed(seed, 1));
    knot_.init(store, mix_seed(seed, 2));
    dilation_.init(store, mix_seed(seed, 3));
    head_.init(store, mix_seed(seed, 4));
  }

  /// Residual floats for one predict_rep call (both trunks).
  std::size_t residual_size() const { return coefficient_.residual_size() + knot_.residual_size(); }

  /// Dilation depends only on the frame interval g.
  std::vector<T> dilation(const ParamStore<T>& store, double frame_interval) const {
    const T g = static_cast<T>(frame_interval);
    std::vector<T> a(cfg_.channels);
    dilation_.forward(store, std::span<const T>(&g, 1), a);
    for (auto& v : a) v = static_cast<T>(softplus(v) + kDilationFloor);
    return a;
  }

  /// Spline representation for one query. `residual` (residual_size floats)
  /// is filled for backward.
  void predict_rep(const ParamStore<T>& store, std::span<const T> z, double delta_x, double delta_y,
                   std::span<const T> dilation, BSplineMotionRep<T>& rep, std::span<T> residual) const {
    if (static_cast<int>(z.size()) != cfg_.channels) throw std::invalid_argument("predict_rep: latent size mismatch");
    std::vector<T> input(z.begin(), z.end());
    input.push_back(static_cast<T>(delta_x));
    input.push_back(static_cast<T>(delta_y));
    rep.coefficients.resize(cfg_.channels);
    rep.knots.resize(cfg_.channels);
    rep.dilation.assign(dilation.begin(), dilation.end());
    coefficient_.forward(store, input, rep.coefficients, residual.subspan(0, coefficient_.residual_size()));
    knot_.forward(store, input, rep.knots, residual.subspan(coefficient_.residual_size(), knot_.residual_size()));
  }

  BSplineMotionRep<T> predict_rep(const ParamStore<T>& store, std::span<const T> z, double delta_x, double delta_y,
                                  double frame_interval) const {
    if (!(frame_interval > 0.0)) throw std::invalid_argument("predict_rep: frame interval must be positive");
    BSplineMotionRep<T> rep;
    std::vector<T> residual(residual_size());
    const auto d = dilation(store, frame_interval);
    predict_rep(store, z, delta_x, delta_y, d, rep, residual);
    return rep;
  }

  /// Affine head on the basis vector; displacement scaled from LR to HR
  /// pixels and clamped to +-max_displacement LR pixels per component.
  /// `basis` (channels floats) receives the basis vector.
  MotionSample<T> motion_at(const ParamStore<T>& store, std::span<const T> coef, std::span<const T> knot,
                            std::span<const T> dil, double t_hat, double scale, double max_displacement,
                            std::span<T> basis) const {
    eval_basis<T>(coef, knot, dil, t_hat, basis);
    std::array<T, kHeadOutputs> out{};
    head_.forward(store, basis, out);
    const double lim = max_displacement;
    return MotionSample<T>{static_cast<T>(std::clamp<double>(out[0], -lim, lim) * scale),
                           static_cast<T>(std::clamp<double>(out[1], -lim, lim) * scale), out[2]};
  }

  MotionSample<T> motion_at(const ParamStore<T>& store, const BSplineMotionRep<T>& rep, double t_hat, double scale,
                            double max_displacement) const {
    std::vector<T> basis(rep.coefficients.size());
    return motion_at(store, rep.coefficients, rep.knots, rep.dilation, t_hat, scale, max_displacement, basis);
  }

  /// Backward of motion_at followed by predict_rep for one query.
  /// Accumulates parameter gradients and dL/dz into `d_z`; returns dL/dt_hat.
  double backward(ParamStore<T>& store, const BSplineMotionRep<T>& rep, std::span<const T> residual, double t_hat,
                  double scale, double max_displacement, const MotionSample<T>& d_motion, double frame_interval,
                  std::span<T> d_z) const {
    std::vector<T> basis(cfg_.channels);
    eval_basis<T>(rep.coefficients, rep.knots, rep.dilation, t_hat, basis);
    std::vector<T> d_coef(cfg_.channels, T(0));
    std::vector<T> d_knot(cfg_.channels, T(0));
    std::vector<T> d_dil(cfg_.channels, T(0));
    const double t_grad = accumulate_head_backward(store, rep.coefficients, rep.knots, rep.dilation, basis, t_hat,
                                                   scale, max_displacement, d_motion, d_coef, d_knot, d_dil);
    rep_backward(store, residual, d_coef, d_knot, d_z);
    dilation_backward(store, d_dil, frame_interval);
    return t_grad;
  }

  /// Head + basis adjoint; adds into the rep gradient accumulators so that
  /// several timesteps sharing one representation can be summed first.
  /// The clamp passes no gradient where it is active.
  double accumulate_head_backward(ParamStore<T>& store, std::span<const T> coef, std::span<const T> knot,
                                  std::span<const T> dil, std::span<const T> basis, double t_hat, double scale,
                                  double max_displacement, const MotionSample<T>& d_motion, std::span<T> d_coef,
                                  std::span<T> d_knot, std::span<T> d_dil) const {
    std::array<T, kHeadOutputs> raw{};
    head_.forward(store, basis, raw);
    const double lim = max_displacement;
    const auto pass = [lim](T v) { return v > -lim && v < lim; };
    const std::array<T, kHeadOutputs> d_out{pass(raw[0]) ? static_cast<T>(d_motion.dx * scale) : T(0),
                                            pass(raw[1]) ? static_cast<T>(d_motion.dy * scale) : T(0),
                                            d_motion.reliability};
    std::array<T, 256> d_basis_buf{};
    std::vector<T> d_basis_heap;
    std::span<T> d_basis;
    if (cfg_.channels <= 256) {
      d_basis = std::span<T>(d_basis_buf.data(), cfg_.channels);
    } else {
      d_basis_heap.resize(cfg_.channels);
      d_basis = d_basis_heap;
    }
    head_.backward(store, basis, d_out, d_basis);
    return eval_basis_backward<T>(coef, knot, dil, t_hat, d_basis, d_coef, d_knot, d_dil);
  }

  /// Adjoint of the two trunks; adds dL/dz into d_z (delta is not learnable).
  void rep_backward(ParamStore<T>& store, std::span<const T> residual, std::span<const T> d_coef,
                    std::span<const T> d_knot, std::span<T> d_z) const {
    std::vector<T> dx(cfg_.channels + 2);
    coefficient_.backward(store, residual.subspan(0, coefficient_.residual_size()), d_coef, dx);
    for (int i = 0; i < cfg_.channels; ++i) d_z[i] += dx[i];
    knot_.backward(store, residual.subspan(coefficient_.residual_size(), knot_.residual_size()), d_knot, dx);
    for (int i = 0; i < cfg_.channels; ++i) d_z[i] += dx[i];
  }

  /// d = softplus(a) + floor with a = w g + b; dd/da = sigmoid(a).
  void dilation_backward(ParamStore<T>& store, std::span<const T> d_dil, double frame_interval) const {
    const T g = static_cast<T>(frame_interval);
    std::vector<T> a(cfg_.channels);
    dilation_.forward(store, std::span<const T>(&g, 1), a);
    std::vector<T> d_a(cfg_.channels);
    for (int i = 0; i < cfg_.channels; ++i) d_a[i] = static_cast<T>(d_dil[i] * sigmoid(a[i]));
    dilation_.backward(store, std::span<const T>(&g, 1), d_a, {});
  }

 private:
  BSplineMapperConfig cfg_;
  Siren<T> coefficient_;
  Siren<T> knot_;
  Linear<T> dilation_;
  Linear<T> head_;
};

}  // namespace bfstvsr
