#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "bfstvsr/grid.hpp"
#include "bfstvsr/param_store.hpp"
#include "bfstvsr/rng.hpp"

namespace bfstvsr {

/// 3x3 convolution, stride 1, zero padding, optional dilation; output has the
/// input's spatial size. Weight layout (out, in, 3, 3).
template <class T>
class Conv3x3 {
 public:
  Conv3x3() = default;
  Conv3x3(ParamStore<T>& store, const std::string& prefix, int in, int out, int dilation = 1)
      : in_(in), out_(out), dilation_(dilation) {
    if (in <= 0 || out <= 0 || dilation <= 0) throw std::invalid_argument("Conv3x3: invalid dimensions");
    weight_ = store.add(prefix + "/weight", {static_cast<std::size_t>(out), static_cast<std::size_t>(in), 3, 3});
    bias_ = store.add(prefix + "/bias", {static_cast<std::size_t>(out)});
  }

  int input_channels() const { return in_; }
  int output_channels() const { return out_; }
  int dilation() const { return dilation_; }
  ParamId weight() const { return weight_; }
  ParamId bias() const { return bias_; }

  /// Uniform in +-bound_scale * sqrt(6 / fan_in), zero bias.
  void init(ParamStore<T>& store, std::uint64_t seed, double bound_scale = 1.0) const {
    Rng rng(seed);
    const double bound = bound_scale * std::sqrt(6.0 / (in_ * 9.0));
    for (auto& w : store.value(weight_)) w = static_cast<T>(rng.uniform(-bound, bound));
    for (auto& b : store.value(bias_)) b = T(0);
  }

  FeatureGrid<T> forward(const ParamStore<T>& store, const FeatureGrid<T>& x) const {
    if (x.channels() != in_) throw std::invalid_argument("Conv3x3: input channel mismatch");
    const int h = x.height();
    const int w = x.width();
    const auto wt = store.value(weight_);
    const auto b = store.value(bias_);
    FeatureGrid<T> y(out_, h, w);
    for (int o = 0; o < out_; ++o) {
      auto yp = y.plane(o);
      for (auto& v : yp) v = b[o];
      for (int i = 0; i < in_; ++i) {
        const auto xp = x.plane(i);
        for (int ky = 0; ky < 3; ++ky) {
          const int dy = (ky - 1) * dilation_;
          for (int kx = 0; kx < 3; ++kx) {
            const int dx = (kx - 1) * dilation_;
            const T k = wt[((static_cast<std::size_t>(o) * in_ + i) * 3 + ky) * 3 + kx];
            const int y0 = std::max(0, -dy);
            const int y1 = std::min(h, h - dy);
            const int x0 = std::max(0, -dx);
            const int x1 = std::min(w, w - dx);
            for (int yy = y0; yy < y1; ++yy) {
              T* dst = yp.data() + static_cast<std::size_t>(yy) * w;
              const T* src = xp.data() + static_cast<std::size_t>(yy + dy) * w + dx;
              for (int xx = x0; xx < x1; ++xx) dst[xx] += k * src[xx];
            }
          }
        }
      }
    }
    return y;
  }

  /// Accumulates weight/bias gradients and returns dL/dx.
  FeatureGrid<T> backward(ParamStore<T>& store, const FeatureGrid<T>& x, const FeatureGrid<T>& dy_grid) const {
    const int h = x.height();
    const int w = x.width();
    const auto wt = store.value(weight_);
    auto gw = store.grad(weight_);
    auto gb = store.grad(bias_);
    FeatureGrid<T> dx_grid(in_, h, w);
    for (int o = 0; o < out_; ++o) {
      const auto gp = dy_grid.plane(o);
      T sum = 0;
      for (T v : gp) sum += v;
      gb[o] += sum;
      for (int i = 0; i < in_; ++i) {
        const auto xp = x.plane(i);
        auto dxp = dx_grid.plane(i);
        for (int ky = 0; ky < 3; ++ky) {
          const int dy = (ky - 1) * dilation_;
          for (int kx = 0; kx < 3; ++kx) {
            const int dx = (kx - 1) * dilation_;
            const std::size_t widx = ((static_cast<std::size_t>(o) * in_ + i) * 3 + ky) * 3 + kx;
            const T k = wt[widx];
            const int y0 = std::max(0, -dy);
            const int y1 = std::min(h, h - dy);
            const int x0 = std::max(0, -dx);
            const int x1 = std::min(w, w - dx);
            T acc = 0;
            for (int yy = y0; yy < y1; ++yy) {
              const T* g = gp.data() + static_cast<std::size_t>(yy) * w;
              const T* src = xp.data() + static_cast<std::size_t>(yy + dy) * w + dx;
              T* dst = dxp.data() + static_cast<std::size_t>(yy + dy) * w + dx;
              for (int xx = x0; xx < x1; ++xx) {
                acc += g[xx] * src[xx];
                dst[xx] += k * g[xx];
              }
            }
            gw[widx] += acc;
          }
        }
      }
    }
    return dx_grid;
  }

 private:
  int in_ = 0;
  int out_ = 0;
  int dilation_ = 1;
  ParamId weight_;
  ParamId bias_;
};

}  // namespace bfstvsr
