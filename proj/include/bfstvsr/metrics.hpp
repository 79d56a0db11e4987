#pragma once

// Y-channel PSNR and SSIM.

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "bfstvsr/grid.hpp"

namespace bfstvsr {

inline constexpr double kPsnrCap = 99.0;

struct MetricReport {
  double psnr_db = 0.0;
  double ssim = 0.0;
  int frame_count = 0;
};

/// BT.601 video-range luma of a [0,1] RGB frame.
template <class T>
FeatureGrid<double> rgb_to_y(const FeatureGrid<T>& rgb) {
  if (rgb.channels() != 3) throw std::invalid_argument("rgb_to_y: expected 3 channels");
  FeatureGrid<double> y(1, rgb.height(), rgb.width());
  const std::size_t n = rgb.plane_size();
  for (std::size_t p = 0; p < n; ++p) {
    const double r = rgb.data()[p];
    const double g = rgb.data()[n + p];
    const double b = rgb.data()[2 * n + p];
    y.data()[p] = (65.481 * r + 128.553 * g + 24.966 * b + 16.0) / 255.0;
  }
  return y;
}

inline double psnr(const FeatureGrid<double>& a, const FeatureGrid<double>& b) {
  if (!a.same_shape(b) || a.size() == 0) throw std::invalid_argument("psnr: shape mismatch");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

namespace detail {

inline std::array<double, 11> ssim_window() {
  std::array<double, 11> w{};
  double sum = 0.0;
  for (int i = 0; i < 11; ++i) {
    const double d = i - 5;
    w[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    sum += w[i];
  }
  for (auto& v : w) v /= sum;
  return w;
}

}  // namespace detail

/// Single-scale SSIM, 11x11 Gaussian window (sigma 1.5), mean over valid positions.
inline double ssim(const FeatureGrid<double>& a, const FeatureGrid<double>& b) {
  if (!a.same_shape(b) || a.channels() != 1) throw std::invalid_argument("ssim: expected equal single-channel planes");
  const int h = a.height();
  const int w = a.width();
  if (h < 11 || w < 11) throw std::invalid_argument("ssim: image smaller than the 11x11 window");
  constexpr double c1 = (0.01 * 1.0) * (0.01 * 1.0);
  constexpr double c2 = (0.03 * 1.0) * (0.03 * 1.0);
  const auto win = detail::ssim_window();
  double total = 0.0;
  for (int y = 0; y + 11 <= h; ++y) {
    for (int x = 0; x + 11 <= w; ++x) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < 11; ++i) {
        for (int j = 0; j < 11; ++j) {
          const double k = win[i] * win[j];
          const double va = a(0, y + i, x + j);
          const double vb = b(0, y + i, x + j);
          ma += k * va;
          mb += k * vb;
          saa += k * va * va;
          sbb += k * vb * vb;
          sab += k * va * vb;
        }
      }
      const double var_a = saa - ma * ma;
      const double var_b = sbb - mb * mb;
      const double cov = sab - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
    }
  }
  return total / static_cast<double>((h - 10) * (w - 10));
}

template <class T, class U>
double y_psnr(const FeatureGrid<T>& a, const FeatureGrid<U>& b) {
  return psnr(rgb_to_y(a), rgb_to_y(b));
}

template <class T, class U>
double y_ssim(const FeatureGrid<T>& a, const FeatureGrid<U>& b) {
  return ssim(rgb_to_y(a), rgb_to_y(b));
}

/// Bilinear upsampling of both references followed by a linear blend in time.
template <class T>
FeatureGrid<T> blend_baseline(const FeatureGrid<T>& frame0, const FeatureGrid<T>& frame1, double t, double scale) {
  if (!frame0.same_shape(frame1)) throw std::invalid_argument("blend_baseline: shape mismatch");
  auto a = bilinear_upsample(frame0, scale);
  const auto b = bilinear_upsample(frame1, scale);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a.data()[i] = static_cast<T>((1.0 - t) * a.data()[i] + t * b.data()[i]);
  }
  return a;
}

}  // namespace bfstvsr
