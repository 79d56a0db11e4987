#pragma once

// Softmax splatting: every source pixel q is pushed to the four bilinear
// neighbours of q + M(q) with weight w_b * exp(Z(q) - shift). Targets hold the
// weighted mean of arriving payloads. Sources are visited in row-major order,
// so the result is deterministic.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "bfstvsr/grid.hpp"

namespace bfstvsr {

inline constexpr double kSplatEps = 1e-8;
inline constexpr double kHoleEps = 1e-6;

template <class T>
struct SplatResult {
  FeatureGrid<T> features;          // C x H x W
  FeatureGrid<T> reliability;       // 1 x H x W, warped logits
  std::vector<std::uint8_t> hole_mask;  // H x W, 1 where weight_sum < kHoleEps
  FeatureGrid<T> weight_sum;        // 1 x H x W
  double logit_shift = 0.0;
};

template <class T>
struct SplatGradients {
  FeatureGrid<T> d_features;  // C x H x W
  FeatureGrid<T> d_motion;    // 2 x H x W
  FeatureGrid<T> d_logits;    // 1 x H x W, includes the path through the shift
  double d_shift = 0.0;       // gradient w.r.t. an externally supplied shift
};

namespace detail {

struct SplatTap {
  int x = 0;
  int y = 0;
  double w = 0.0;
  double dw_dx = 0.0;
  double dw_dy = 0.0;
};

/// Bilinear taps of a continuous target; out-of-bounds taps get w = 0.
inline std::array<SplatTap, 4> splat_taps(double tx, double ty, int h, int w) {
  const double fx0 = std::floor(tx);
  const double fy0 = std::floor(ty);
  const double fx = tx - fx0;
  const double fy = ty - fy0;
  const int x0 = static_cast<int>(fx0);
  const int y0 = static_cast<int>(fy0);
  std::array<SplatTap, 4> taps{SplatTap{x0, y0, (1 - fx) * (1 - fy), -(1 - fy), -(1 - fx)},
                               SplatTap{x0 + 1, y0, fx * (1 - fy), (1 - fy), -fx},
                               SplatTap{x0, y0 + 1, (1 - fx) * fy, -fy, (1 - fx)},
                               SplatTap{x0 + 1, y0 + 1, fx * fy, fy, fx}};
  for (auto& t : taps) {
    if (t.x < 0 || t.x >= w || t.y < 0 || t.y >= h) t = SplatTap{-1, -1, 0.0, 0.0, 0.0};
  }
  return taps;
}

template <class T>
void check_splat_inputs(const FeatureGrid<T>& f, const FeatureGrid<T>& m, const FeatureGrid<T>& z) {
  if (m.channels() != 2 || z.channels() != 1 || f.height() != m.height() || f.width() != m.width() ||
      f.height() != z.height() || f.width() != z.width()) {
    throw std::invalid_argument("splat: features, motion (2 ch) and logits (1 ch) must share H x W");
  }
  if (!f.all_finite() || !m.all_finite() || !z.all_finite()) {
    throw std::invalid_argument("splat: non-finite input");
  }
}

}  // namespace detail

/// Maximum logit, the default stabilizing shift.
template <class T>
double max_logit(const FeatureGrid<T>& logits) {
  double m = -std::numeric_limits<double>::infinity();
  for (T v : logits.data()) m = std::max(m, static_cast<double>(v));
  return m;
}

/// Index of the first maximal logit.
template <class T>
std::size_t argmax_logit(const FeatureGrid<T>& logits) {
  const auto d = logits.data();
  return static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
}

template <class T>
SplatResult<T> splat_forward(const FeatureGrid<T>& features, const FeatureGrid<T>& motion,
                             const FeatureGrid<T>& logits, double eps = kSplatEps,
                             std::optional<double> logit_shift = std::nullopt) {
  detail::check_splat_inputs(features, motion, logits);
  if (!(eps > 0.0)) throw std::invalid_argument("splat: eps must be positive");
  const int c = features.channels();
  const int h = features.height();
  const int w = features.width();
  const double shift = logit_shift.value_or(max_logit(logits));

  std::vector<double> num(static_cast<std::size_t>(c) * h * w, 0.0);
  std::vector<double> num_z(static_cast<std::size_t>(h) * w, 0.0);
  std::vector<double> den(static_cast<std::size_t>(h) * w, 0.0);
  const std::size_t plane = static_cast<std::size_t>(h) * w;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double u = std::exp(static_cast<double>(logits(0, y, x)) - shift);
      const auto taps = detail::splat_taps(x + static_cast<double>(motion(0, y, x)),
                                           y + static_cast<double>(motion(1, y, x)), h, w);
      for (const auto& t : taps) {
        if (t.w == 0.0) continue;
        const std::size_t p = static_cast<std::size_t>(t.y) * w + t.x;
        const double wu = t.w * u;
        for (int k = 0; k < c; ++k) num[k * plane + p] += wu * features(k, y, x);
        num_z[p] += wu * logits(0, y, x);
        den[p] += wu;
      }
    }
  }

  SplatResult<T> r{FeatureGrid<T>(c, h, w), FeatureGrid<T>(1, h, w), std::vector<std::uint8_t>(plane, 0),
                   FeatureGrid<T>(1, h, w), shift};
  for (std::size_t p = 0; p < plane; ++p) {
    r.weight_sum.data()[p] = static_cast<T>(den[p]);
    if (den[p] < kHoleEps) {
      r.hole_mask[p] = 1;
      continue;
    }
    const double inv = 1.0 / (den[p] + eps);
    for (int k = 0; k < c; ++k) r.features.data()[k * plane + p] = static_cast<T>(num[k * plane + p] * inv);
    r.reliability.data()[p] = static_cast<T>(num_z[p] * inv);
  }
  return r;
}

/// Adjoint of splat_forward. `d_weight_sum` may be empty.
/// Holes are constant zero and pass no gradient to features/reliability.
template <class T>
SplatGradients<T> splat_backward(const FeatureGrid<T>& features, const FeatureGrid<T>& motion,
                                 const FeatureGrid<T>& logits, const SplatResult<T>& result,
                                 const FeatureGrid<T>& d_out, const FeatureGrid<T>* d_reliability,
                                 const FeatureGrid<T>* d_weight_sum, double eps = kSplatEps,
                                 bool shift_is_own_max = true) {
  const int c = features.channels();
  const int h = features.height();
  const int w = features.width();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const double shift = result.logit_shift;

  // Per-target adjoints of numerator, logit numerator and denominator.
  std::vector<double> d_num(static_cast<std::size_t>(c) * plane, 0.0);
  std::vector<double> d_num_z(plane, 0.0);
  std::vector<double> d_den(plane, 0.0);
  for (std::size_t p = 0; p < plane; ++p) {
    const double den = result.weight_sum.data()[p];
    if (d_weight_sum != nullptr) d_den[p] += d_weight_sum->data()[p];
    if (result.hole_mask[p]) continue;
    const double inv = 1.0 / (den + eps);
    double acc = 0.0;
    for (int k = 0; k < c; ++k) {
      const double g = d_out.data()[k * plane + p];
      d_num[k * plane + p] = g * inv;
      acc += g * result.features.data()[k * plane + p];
    }
    double gz = 0.0;
    if (d_reliability != nullptr) {
      gz = d_reliability->data()[p];
      d_num_z[p] = gz * inv;
      acc += gz * result.reliability.data()[p];
    }
    d_den[p] -= acc * inv;
  }

  SplatGradients<T> g{FeatureGrid<T>(c, h, w), FeatureGrid<T>(2, h, w), FeatureGrid<T>(1, h, w), 0.0};
  double d_shift = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double z = logits(0, y, x);
      const double u = std::exp(z - shift);
      const auto taps = detail::splat_taps(x + static_cast<double>(motion(0, y, x)),
                                           y + static_cast<double>(motion(1, y, x)), h, w);
      double d_u = 0.0;
      double d_mx = 0.0;
      double d_my = 0.0;
      double d_z_payload = 0.0;
      std::vector<double> d_f(c, 0.0);
      for (const auto& t : taps) {
        if (t.w == 0.0 && t.dw_dx == 0.0 && t.dw_dy == 0.0) continue;
        const std::size_t p = static_cast<std::size_t>(t.y) * w + t.x;
        // d(w u) collects every use of the product w_b * u at this target.
        double d_wu = d_den[p] + z * d_num_z[p];
        for (int k = 0; k < c; ++k) {
          d_wu += features(k, y, x) * d_num[k * plane + p];
          d_f[k] += t.w * u * d_num[k * plane + p];
        }
        d_z_payload += t.w * u * d_num_z[p];
        d_u += t.w * d_wu;
        d_mx += u * d_wu * t.dw_dx;
        d_my += u * d_wu * t.dw_dy;
      }
      for (int k = 0; k < c; ++k) g.d_features(k, y, x) = static_cast<T>(d_f[k]);
      g.d_motion(0, y, x) = static_cast<T>(d_mx);
      g.d_motion(1, y, x) = static_cast<T>(d_my);
      g.d_logits(0, y, x) = static_cast<T>(d_z_payload + u * d_u);
      d_shift -= u * d_u;
    }
  }
  if (shift_is_own_max) {
    const auto idx = argmax_logit(logits);
    g.d_logits.data()[idx] = static_cast<T>(g.d_logits.data()[idx] + d_shift);
  } else {
    g.d_shift = d_shift;
  }
  return g;
}

}  // namespace bfstvsr
