#pragma once

// Sine-activated MLP (SIREN) and a plain affine layer, both with explicit
// forward residuals and hand-written adjoints.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bfstvsr/param_store.hpp"
#include "bfstvsr/rng.hpp"

namespace bfstvsr {

/// Dot product with eight interleaved partial sums combined in a fixed order;
/// vectorizes without reassociation flags and stays deterministic.
template <class T>
T dot(const T* a, const T* b, int n) {
  T lanes[8] = {};
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    for (int k = 0; k < 8; ++k) lanes[k] += a[i + k] * b[i + k];
  }
  T tail = T(0);
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((lanes[0] + lanes[4]) + (lanes[1] + lanes[5])) + ((lanes[2] + lanes[6]) + (lanes[3] + lanes[7])) + tail;
}

struct SirenConfig {
  std::vector<int> layer_dims;  // input, hidden..., output
  double omega0 = 30.0;         // frequency scale of the first layer
  double omega_hidden = 30.0;   // frequency scale of the remaining sine layers

  void validate() const {
    if (layer_dims.size() < 2) throw std::invalid_argument("SirenConfig: need at least input and output dims");
    for (int d : layer_dims) {
      if (d <= 0) throw std::invalid_argument("SirenConfig: dims must be positive");
    }
  }
};

/// Layers 0..L-2 compute h' = sin(w * (W h + b)); the last layer is affine.
template <class T>
class Siren {
 public:
  Siren() = default;

  Siren(ParamStore<T>& store, const std::string& prefix, SirenConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    for (std::size_t l = 0; l + 1 < cfg_.layer_dims.size(); ++l) {
      const auto in = static_cast<std::size_t>(cfg_.layer_dims[l]);
      const auto out = static_cast<std::size_t>(cfg_.layer_dims[l + 1]);
      weights_.push_back(store.add(prefix + "/l" + std::to_string(l) + "/weight", {out, in}));
      biases_.push_back(store.add(prefix + "/l" + std::to_string(l) + "/bias", {out}));
    }
    std::size_t hidden = 0;
    for (std::size_t l = 1; l + 1 < cfg_.layer_dims.size(); ++l) hidden += cfg_.layer_dims[l];
    residual_size_ = static_cast<std::size_t>(cfg_.layer_dims[0]) + 2 * hidden;
  }

  const SirenConfig& config() const { return cfg_; }
  int input_dim() const { return cfg_.layer_dims.front(); }
  int output_dim() const { return cfg_.layer_dims.back(); }
  int layer_count() const { return static_cast<int>(weights_.size()); }
  int first_width() const { return cfg_.layer_dims[1]; }
  ParamId weight(int layer) const { return weights_[layer]; }
  ParamId bias(int layer) const { return biases_[layer]; }

  /// Floats needed to hold the residuals of one forward call.
  std::size_t residual_size() const { return residual_size_; }

  /// Weight bound of layer `l` under the SIREN initialization.
  double init_bound(int layer) const {
    const double fan_in = cfg_.layer_dims[layer];
    if (layer == 0) return 1.0 / fan_in;
    return std::sqrt(6.0 / fan_in) / cfg_.omega0;
  }

  void init(ParamStore<T>& store, std::uint64_t seed) const {
    Rng rng(seed);
    for (int l = 0; l < layer_count(); ++l) {
      const double bound = init_bound(l);
      for (auto& w : store.value(weights_[l])) w = static_cast<T>(rng.uniform(-bound, bound));
      std::ranges::fill(store.value(biases_[l]), T(0));
    }
  }

  void forward(const ParamStore<T>& store, std::span<const T> x, std::span<T> y, std::span<T> residual) const {
    check_io(x.size(), y.size(), residual.size());
    auto first = residual.subspan(0, cfg_.layer_dims[0]);
    std::ranges::copy(x, first.begin());
    std::vector<T> acc(cfg_.layer_dims[1]);
    first_layer_bias(store, acc);
    first_layer_accumulate(store, x, 0, input_dim(), acc);
    finish_forward(store, acc, y, residual);
  }

  /// acc = b of the first layer.
  void first_layer_bias(const ParamStore<T>& store, std::span<T> acc) const {
    const auto b = store.value(biases_[0]);
    std::ranges::copy(b, acc.begin());
  }

  /// acc += W[:, begin:end] x[begin:end] for the first layer.
  void first_layer_accumulate(const ParamStore<T>& store, std::span<const T> x, int begin, int end,
                              std::span<T> acc) const {
    const auto w = store.value(weights_[0]);
    const int in = input_dim();
    const int out = cfg_.layer_dims[1];
    for (int o = 0; o < out; ++o) {
      const T* row = w.data() + static_cast<std::size_t>(o) * in;
      acc[o] += dot(row + begin, x.data() + begin, end - begin);
    }
  }

  /// Completes a forward pass given the first layer's affine output.
  void forward_from_first(const ParamStore<T>& store, std::span<const T> x, std::span<const T> first_acc,
                          std::span<T> y, std::span<T> residual) const {
    check_io(x.size(), y.size(), residual.size());
    std::ranges::copy(x, residual.begin());
    std::vector<T> acc(first_acc.begin(), first_acc.end());
    finish_forward(store, acc, y, residual);
  }

  /// Accumulates parameter gradients; writes dL/dx when dx is non-empty.
  void backward(ParamStore<T>& store, std::span<const T> residual, std::span<const T> dy, std::span<T> dx) const {
    if (residual.size() != residual_size_ || static_cast<int>(dy.size()) != output_dim() ||
        (!dx.empty() && static_cast<int>(dx.size()) != input_dim())) {
      throw std::invalid_argument("Siren::backward: residual or gradient shape mismatch");
    }
    const int layers = layer_count();
    std::vector<T> g(dy.begin(), dy.end());
    std::vector<T> dh;
    for (int l = layers - 1; l >= 0; --l) {
      const int in = cfg_.layer_dims[l];
      const int out = cfg_.layer_dims[l + 1];
      const auto h = activation(residual, l);
      auto w = store.value(weights_[l]);
      auto gw = store.grad(weights_[l]);
      auto gb = store.grad(biases_[l]);
      const bool need_dh = l > 0 || !dx.empty();
      dh.assign(in, T(0));
      for (int o = 0; o < out; ++o) {
        const T go = g[o];
        gb[o] += go;
        T* gw_row = gw.data() + static_cast<std::size_t>(o) * in;
        const T* w_row = w.data() + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) gw_row[i] += go * h[i];
        if (need_dh) {
          for (int i = 0; i < in; ++i) dh[i] += w_row[i] * go;
        }
      }
      if (l > 0) {
        const auto pre = preactivation(residual, l - 1);
        const T omega = static_cast<T>(l == 1 ? cfg_.omega0 : cfg_.omega_hidden);
        g.assign(in, T(0));
        for (int i = 0; i < in; ++i) g[i] = dh[i] * std::cos(pre[i]) * omega;
      } else if (!dx.empty()) {
        std::ranges::copy(dh, dx.begin());
      }
    }
  }

 private:
  void check_io(std::size_t nx, std::size_t ny, std::size_t nr) const {
    if (static_cast<int>(nx) != input_dim()) throw std::invalid_argument("Siren: input dimension mismatch");
    if (static_cast<int>(ny) != output_dim()) throw std::invalid_argument("Siren: output dimension mismatch");
    if (nr != residual_size_) throw std::invalid_argument("Siren: residual buffer has wrong size");
  }

  // Residual layout: [h_0, h_1, ..., h_{L-1}, pre_1, ..., pre_{L-1}], where
  // h_0 is the input and pre_k the scaled pre-activation producing h_k.
  std::span<const T> activation(std::span<const T> residual, int l) const {
    std::size_t off = 0;
    for (int k = 0; k < l; ++k) off += cfg_.layer_dims[k];
    return residual.subspan(off, cfg_.layer_dims[l]);
  }
  std::span<T> activation(std::span<T> residual, int l) const {
    std::size_t off = 0;
    for (int k = 0; k < l; ++k) off += cfg_.layer_dims[k];
    return residual.subspan(off, cfg_.layer_dims[l]);
  }
  std::size_t preact_offset(int hidden_index) const {
    std::size_t off = 0;
    for (int k = 0; k < layer_count(); ++k) off += cfg_.layer_dims[k];
    for (int k = 1; k <= hidden_index; ++k) off += cfg_.layer_dims[k];
    return off;
  }
  std::span<const T> preactivation(std::span<const T> residual, int hidden_index) const {
    return residual.subspan(preact_offset(hidden_index), cfg_.layer_dims[hidden_index + 1]);
  }
  std::span<T> preactivation(std::span<T> residual, int hidden_index) const {
    return residual.subspan(preact_offset(hidden_index), cfg_.layer_dims[hidden_index + 1]);
  }

  void finish_forward(const ParamStore<T>& store, std::vector<T>& acc, std::span<T> y, std::span<T> residual) const {
    const int layers = layer_count();
    for (int l = 0; l < layers; ++l) {
      const int out = cfg_.layer_dims[l + 1];
      if (l > 0) {
        const int in = cfg_.layer_dims[l];
        const auto h = activation(std::span<const T>(residual), l);
        const auto w = store.value(weights_[l]);
        const auto b = store.value(biases_[l]);
        acc.resize(out);
        for (int o = 0; o < out; ++o) {
          const T* row = w.data() + static_cast<std::size_t>(o) * in;
          acc[o] = b[o] + dot(row, h.data(), in);
        }
      }
      if (l + 1 == layers) {
        std::ranges::copy(acc, y.begin());
      } else {
        const T omega = static_cast<T>(l == 0 ? cfg_.omega0 : cfg_.omega_hidden);
        auto pre = preactivation(residual, l);
        auto h_next = activation(residual, l + 1);
        for (int o = 0; o < out; ++o) {
          pre[o] = omega * acc[o];
          h_next[o] = std::sin(pre[o]);
        }
      }
    }
  }

  SirenConfig cfg_;
  std::vector<ParamId> weights_;
  std::vector<ParamId> biases_;
  std::size_t residual_size_ = 0;
};

/// y = W x + b. Initialized uniform in +-1/sqrt(fan_in), zero bias.
template <class T>
class Linear {
 public:
  Linear() = default;
  Linear(ParamStore<T>& store, const std::string& prefix, int in, int out) : in_(in), out_(out) {
    if (in <= 0 || out <= 0) throw std::invalid_argument("Linear: dims must be positive");
    weight_ = store.add(prefix + "/weight", {static_cast<std::size_t>(out), static_cast<std::size_t>(in)});
    bias_ = store.add(prefix + "/bias", {static_cast<std::size_t>(out)});
  }

  int input_dim() const { return in_; }
  int output_dim() const { return out_; }
  ParamId weight() const { return weight_; }
  ParamId bias() const { return bias_; }

  void init(ParamStore<T>& store, std::uint64_t seed) const {
    Rng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
    for (auto& w : store.value(weight_)) w = static_cast<T>(rng.uniform(-bound, bound));
    std::ranges::fill(store.value(bias_), T(0));
  }

  void forward(const ParamStore<T>& store, std::span<const T> x, std::span<T> y) const {
    if (static_cast<int>(x.size()) != in_ || static_cast<int>(y.size()) != out_) {
      throw std::invalid_argument("Linear: dimension mismatch");
    }
    const auto w = store.value(weight_);
    const auto b = store.value(bias_);
    for (int o = 0; o < out_; ++o) {
      const T* row = w.data() + static_cast<std::size_t>(o) * in_;
      y[o] = b[o] + dot(row, x.data(), in_);
    }
  }

  void backward(ParamStore<T>& store, std::span<const T> x, std::span<const T> dy, std::span<T> dx) const {
    const auto w = store.value(weight_);
    auto gw = store.grad(weight_);
    auto gb = store.grad(bias_);
    if (!dx.empty()) std::ranges::fill(dx, T(0));
    for (int o = 0; o < out_; ++o) {
      const T go = dy[o];
      gb[o] += go;
      T* gw_row = gw.data() + static_cast<std::size_t>(o) * in_;
      const T* w_row = w.data() + static_cast<std::size_t>(o) * in_;
      for (int i = 0; i < in_; ++i) gw_row[i] += go * x[i];
      if (!dx.empty()) {
        for (int i = 0; i < in_; ++i) dx[i] += w_row[i] * go;
      }
    }
  }

 private:
  int in_ = 0;
  int out_ = 0;
  ParamId weight_;
  ParamId bias_;
};

}  // namespace bfstvsr
