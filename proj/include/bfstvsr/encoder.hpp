#pragma once

// Small convolutional encoder producing the three latent maps F0, F01, F1.
// Each frame is encoded together with its partner frame (shared weights,
// order swapped), so identical inputs give bit-identical F0 and F1.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "bfstvsr/conv.hpp"
#include "bfstvsr/grid.hpp"
#include "bfstvsr/param_store.hpp"
#include "bfstvsr/rng.hpp"

namespace bfstvsr {

template <class T>
struct LatentTriple {
  FeatureGrid<T> f0;
  FeatureGrid<T> f01;
  FeatureGrid<T> f1;
};

struct EncoderConfig {
  int channels = 16;
  int second_dilation = 1;
  double omega = 1.0;
};

template <class T>
class Encoder {
 public:
  struct Branch {
    FeatureGrid<T> input;   // 6 x H x W
    FeatureGrid<T> pre1;    // omega * conv1
    FeatureGrid<T> hidden;  // sin(pre1)
    FeatureGrid<T> pre2;
  };
  struct Residuals {
    Branch b0;
    Branch b1;
    FeatureGrid<T> fused_input;  // concat(F0, F1)
  };

  Encoder() = default;
  Encoder(ParamStore<T>& store, const std::string& prefix, EncoderConfig cfg) : cfg_(cfg) {
    if (cfg_.channels <= 0) throw std::invalid_argument("Encoder: channels must be positive");
    conv1_ = Conv3x3<T>(store, prefix + "/conv1", 6, cfg_.channels);
    conv2_ = Conv3x3<T>(store, prefix + "/conv2", cfg_.channels, cfg_.channels, cfg_.second_dilation);
    fuse_ = Conv3x3<T>(store, prefix + "/fuse", 2 * cfg_.channels, cfg_.channels);
  }

  const EncoderConfig& config() const { return cfg_; }

  void init(ParamStore<T>& store, std::uint64_t seed) const {
    conv1_.init(store, mix_seed(seed, 1));
    conv2_.init(store, mix_seed(seed, 2));
    fuse_.init(store, mix_seed(seed, 3));
  }

  LatentTriple<T> encode(const ParamStore<T>& store, const FeatureGrid<T>& frame0, const FeatureGrid<T>& frame1,
                         Residuals* residuals = nullptr) const {
    if (!frame0.same_shape(frame1) || frame0.channels() != 3) {
      throw std::invalid_argument("encode: frames must both be 3 x H x W with equal shapes");
    }
    Branch b0;
    Branch b1;
    auto f0 = branch(store, concat_channels(frame0, frame1), b0);
    auto f1 = branch(store, concat_channels(frame1, frame0), b1);
    auto fused_input = concat_channels(f0, f1);
    auto f01 = fuse_.forward(store, fused_input);
    if (residuals != nullptr) {
      residuals->b0 = std::move(b0);
      residuals->b1 = std::move(b1);
      residuals->fused_input = std::move(fused_input);
    }
    return {std::move(f0), std::move(f01), std::move(f1)};
  }

  /// Accumulates parameter gradients from dL/dF0, dL/dF01, dL/dF1.
  void backward(ParamStore<T>& store, const Residuals& res, const FeatureGrid<T>& d_f0, const FeatureGrid<T>& d_f01,
                const FeatureGrid<T>& d_f1) const {
    const auto d_fused = fuse_.backward(store, res.fused_input, d_f01);
    const int c = cfg_.channels;
    FeatureGrid<T> g0 = d_f0;
    FeatureGrid<T> g1 = d_f1;
    const std::size_t n = g0.size();
    for (std::size_t i = 0; i < n; ++i) {
      g0.data()[i] += d_fused.data()[i];
      g1.data()[i] += d_fused.data()[i + static_cast<std::size_t>(c) * g0.plane_size()];
    }
    branch_backward(store, res.b0, g0);
    branch_backward(store, res.b1, g1);
  }

 private:
  FeatureGrid<T> branch(const ParamStore<T>& store, FeatureGrid<T> input, Branch& b) const {
    const T omega = static_cast<T>(cfg_.omega);
    b.pre1 = conv1_.forward(store, input);
    for (auto& v : b.pre1.data()) v *= omega;
    b.hidden = b.pre1;
    for (auto& v : b.hidden.data()) v = std::sin(v);
    b.pre2 = conv2_.forward(store, b.hidden);
    for (auto& v : b.pre2.data()) v *= omega;
    FeatureGrid<T> out = b.pre2;
    for (auto& v : out.data()) v = std::sin(v);
    b.input = std::move(input);
    return out;
  }

  void branch_backward(ParamStore<T>& store, const Branch& b, const FeatureGrid<T>& d_out) const {
    const T omega = static_cast<T>(cfg_.omega);
    FeatureGrid<T> d_pre2 = d_out;
    for (std::size_t i = 0; i < d_pre2.size(); ++i) d_pre2.data()[i] *= std::cos(b.pre2.data()[i]) * omega;
    auto d_hidden = conv2_.backward(store, b.hidden, d_pre2);
    for (std::size_t i = 0; i < d_hidden.size(); ++i) d_hidden.data()[i] *= std::cos(b.pre1.data()[i]) * omega;
    conv1_.backward(store, b.input, d_hidden);
  }

  EncoderConfig cfg_;
  Conv3x3<T> conv1_;
  Conv3x3<T> conv2_;
  Conv3x3<T> fuse_;
};

}  // namespace bfstvsr
