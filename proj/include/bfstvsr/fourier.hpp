#pragma once

// Spatial Fourier mapper: per latent cell, SIREN estimators predict 2C
// amplitudes and C (fx, fy) frequency pairs; a query at offset delta from its
// nearest cell is embedded as A (.) [cos(pi F delta); sin(pi F delta)] and
// projected back to C channels.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bfstvsr/conv.hpp"
#include "bfstvsr/grid.hpp"
#include "bfstvsr/param_store.hpp"
#include "bfstvsr/rng.hpp"
#include "bfstvsr/siren.hpp"

namespace bfstvsr {

template <class T>
struct FourierRep {
  std::vector<T> amplitudes;   // 2C: cos block then sin block
  std::vector<T> frequencies;  // 2C: row i is (fx, fy) = (f[2i], f[2i+1])
};

/// Writes A (.) [cos(phi); sin(phi)] with phi_i = pi (fx_i dx + fy_i dy).
template <class T>
void fourier_features(std::span<const T> amplitudes, std::span<const T> frequencies, double delta_x,
                      double delta_y, std::span<T> out) {
  const std::size_t c = amplitudes.size() / 2;
  for (std::size_t i = 0; i < c; ++i) {
    const double phi = std::numbers::pi * (frequencies[2 * i] * delta_x + frequencies[2 * i + 1] * delta_y);
    out[i] = static_cast<T>(amplitudes[i] * std::cos(phi));
    out[c + i] = static_cast<T>(amplitudes[c + i] * std::sin(phi));
  }
}

template <class T>
std::vector<T> fourier_features(const FourierRep<T>& rep, double delta_x, double delta_y) {
  std::vector<T> out(rep.amplitudes.size());
  fourier_features<T>(rep.amplitudes, rep.frequencies, delta_x, delta_y, out);
  return out;
}

/// Adjoint of fourier_features; adds into d_amplitudes and d_frequencies.
template <class T>
void fourier_features_backward(std::span<const T> amplitudes, std::span<const T> frequencies, double delta_x,
                               double delta_y, std::span<const T> d_out, std::span<T> d_amplitudes,
                               std::span<T> d_frequencies) {
  const std::size_t c = amplitudes.size() / 2;
  for (std::size_t i = 0; i < c; ++i) {
    const double phi = std::numbers::pi * (frequencies[2 * i] * delta_x + frequencies[2 * i + 1] * delta_y);
    const double cs = std::cos(phi);
    const double sn = std::sin(phi);
    d_amplitudes[i] += static_cast<T>(d_out[i] * cs);
    d_amplitudes[c + i] += static_cast<T>(d_out[c + i] * sn);
    const double d_phi = -d_out[i] * amplitudes[i] * sn + d_out[c + i] * amplitudes[c + i] * cs;
    d_frequencies[2 * i] += static_cast<T>(d_phi * std::numbers::pi * delta_x);
    d_frequencies[2 * i + 1] += static_cast<T>(d_phi * std::numbers::pi * delta_y);
  }
}

struct FourierMapperConfig {
  int channels = 16;
  std::vector<int> hidden = {32, 32, 32};
  double omega0 = 30.0;
};

/// Amplitude and (post-convolution) frequency estimates over a latent grid.
template <class T>
struct FourierField {
  FeatureGrid<T> amplitude;  // 2C x H x W
  FeatureGrid<T> frequency;  // 2C x H x W
};

template <class T>
struct FourierFieldResiduals {
  std::vector<T> amplitude_trunk;  // per cell, amplitude SIREN residuals
  std::vector<T> frequency_trunk;  // per cell, frequency SIREN residuals
  FeatureGrid<T> raw_frequency;    // frequency field before the 3x3 conv
};

template <class T>
class FourierMapper {
 public:
  FourierMapper() = default;

  FourierMapper(ParamStore<T>& store, const std::string& prefix, FourierMapperConfig cfg) : cfg_(std::move(cfg)) {
    const int c = cfg_.channels;
    if (c <= 0) throw std::invalid_argument("FourierMapper: channels must be positive");
    SirenConfig trunk;
    trunk.layer_dims.push_back(c);
    trunk.layer_dims.insert(trunk.layer_dims.end(), cfg_.hidden.begin(), cfg_.hidden.end());
    trunk.layer_dims.push_back(2 * c);
    trunk.omega0 = trunk.omega_hidden = cfg_.omega0;
    amplitude_ = Siren<T>(store, prefix + "/amplitude", trunk);
    frequency_ = Siren<T>(store, prefix + "/frequency", trunk);
    frequency_conv_ = Conv3x3<T>(store, prefix + "/frequency_conv", 2 * c, 2 * c);
    projection_ = Linear<T>(store, prefix + "/projection", 2 * c, c);
  }

  const FourierMapperConfig& config() const { return cfg_; }
  int channels() const { return cfg_.channels; }
  const Siren<T>& amplitude_estimator() const { return amplitude_; }
  const Siren<T>& frequency_estimator() const { return frequency_; }
  const Conv3x3<T>& frequency_conv() const { return frequency_conv_; }
  const Linear<T>& projection() const { return projection_; }

  void init(ParamStore<T>& store, std::uint64_t seed) const {
    amplitude_.init(store, mix_seed(seed, 1));
    frequency_.init(store, mix_seed(seed, 2));
    // Small perturbation of the identity so the conv starts as a pass-through.
    frequency_conv_.init(store, mix_seed(seed, 3), 0.1);
    auto w = store.value(frequency_conv_.weight());
    const int c2 = 2 * cfg_.channels;
    for (int o = 0; o < c2; ++o) w[((static_cast<std::size_t>(o) * c2 + o) * 3 + 1) * 3 + 1] += T(1);
    projection_.init(store, mix_seed(seed, 4));
  }

  /// Point estimate without the spatial convolution (depends on z_r only).
  FourierRep<T> estimate_rep(const ParamStore<T>& store, std::span<const T> z) const {
    if (static_cast<int>(z.size()) != cfg_.channels) throw std::invalid_argument("estimate_rep: latent size mismatch");
    FourierRep<T> rep{std::vector<T>(2 * cfg_.channels), std::vector<T>(2 * cfg_.channels)};
    std::vector<T> res_a(amplitude_.residual_size());
    std::vector<T> res_f(frequency_.residual_size());
    amplitude_.forward(store, z, rep.amplitudes, res_a);
    frequency_.forward(store, z, rep.frequencies, res_f);
    return rep;
  }

  /// f_theta_f applied to the Fourier embedding of a point representation.
  std::vector<T> feature_at(const ParamStore<T>& store, const FourierRep<T>& rep, double delta_x,
                            double delta_y) const {
    const auto feat = fourier_features(rep, delta_x, delta_y);
    std::vector<T> out(cfg_.channels);
    projection_.forward(store, feat, out);
    return out;
  }

  std::vector<T> feature_at(const ParamStore<T>& store, std::span<const T> z, double delta_x, double delta_y) const {
    return feature_at(store, estimate_rep(store, z), delta_x, delta_y);
  }

  /// Per-cell estimators followed by the 3x3 conv over the frequency field.
  FourierField<T> estimate_field(const ParamStore<T>& store, const FeatureGrid<T>& latent,
                                 FourierFieldResiduals<T>* residuals = nullptr) const {
    const int c = cfg_.channels;
    if (latent.channels() != c) throw std::invalid_argument("estimate_field: latent channel mismatch");
    const int h = latent.height();
    const int w = latent.width();
    const std::size_t cells = static_cast<std::size_t>(h) * w;
    FeatureGrid<T> amp(2 * c, h, w);
    FeatureGrid<T> raw(2 * c, h, w);
    std::vector<T> local_a(amplitude_.residual_size());
    std::vector<T> local_f(frequency_.residual_size());
    if (residuals != nullptr) {
      residuals->amplitude_trunk.assign(cells * amplitude_.residual_size(), T(0));
      residuals->frequency_trunk.assign(cells * frequency_.residual_size(), T(0));
    }
    std::vector<T> z(c);
    std::vector<T> out_a(2 * c);
    std::vector<T> out_f(2 * c);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t cell = static_cast<std::size_t>(y) * w + x;
        for (int k = 0; k < c; ++k) z[k] = latent(k, y, x);
        std::span<T> ra = local_a;
        std::span<T> rf = local_f;
        if (residuals != nullptr) {
          ra = std::span<T>(residuals->amplitude_trunk).subspan(cell * amplitude_.residual_size(),
                                                                amplitude_.residual_size());
          rf = std::span<T>(residuals->frequency_trunk).subspan(cell * frequency_.residual_size(),
                                                                frequency_.residual_size());
        }
        amplitude_.forward(store, z, out_a, ra);
        frequency_.forward(store, z, out_f, rf);
        for (int k = 0; k < 2 * c; ++k) {
          amp(k, y, x) = out_a[k];
          raw(k, y, x) = out_f[k];
        }
      }
    }
    FourierField<T> field{std::move(amp), frequency_conv_.forward(store, raw)};
    if (residuals != nullptr) residuals->raw_frequency = std::move(raw);
    return field;
  }

  /// Feature for a query whose nearest cell is (cx, cy). `embedding` (2C)
  /// receives the Fourier embedding when non-empty.
  void query_feature(const ParamStore<T>& store, const FourierField<T>& field, int cx, int cy, double delta_x,
                     double delta_y, std::span<T> out, std::span<T> embedding = {}) const {
    const int c2 = 2 * cfg_.channels;
    std::vector<T> amp(c2);
    std::vector<T> freq(c2);
    gather(field, cx, cy, amp, freq);
    std::vector<T> local;
    if (embedding.empty()) {
      local.resize(c2);
      embedding = local;
    }
    fourier_features<T>(amp, freq, delta_x, delta_y, embedding);
    projection_.forward(store, embedding, out);
  }

  /// Adjoint of query_feature; adds into the per-cell field gradients.
  void query_backward(ParamStore<T>& store, const FourierField<T>& field, int cx, int cy, double delta_x,
                      double delta_y, std::span<const T> embedding, std::span<const T> d_out,
                      FourierField<T>& d_field) const {
    const int c2 = 2 * cfg_.channels;
    std::vector<T> d_emb(c2);
    projection_.backward(store, embedding, d_out, d_emb);
    std::vector<T> amp(c2);
    std::vector<T> freq(c2);
    gather(field, cx, cy, amp, freq);
    std::vector<T> d_amp(c2, T(0));
    std::vector<T> d_freq(c2, T(0));
    fourier_features_backward<T>(amp, freq, delta_x, delta_y, d_emb, d_amp, d_freq);
    for (int k = 0; k < c2; ++k) {
      d_field.amplitude(k, cy, cx) += d_amp[k];
      d_field.frequency(k, cy, cx) += d_freq[k];
    }
  }

  /// Adjoint of estimate_field. Returns dL/dlatent.
  FeatureGrid<T> field_backward(ParamStore<T>& store, const FeatureGrid<T>& latent,
                                const FourierFieldResiduals<T>& residuals, const FourierField<T>& d_field) const {
    const int c = cfg_.channels;
    const int h = latent.height();
    const int w = latent.width();
    const auto d_raw = frequency_conv_.backward(store, residuals.raw_frequency, d_field.frequency);
    FeatureGrid<T> d_latent(c, h, w);
    std::vector<T> d_a(2 * c);
    std::vector<T> d_f(2 * c);
    std::vector<T> dz(c);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t cell = static_cast<std::size_t>(y) * w + x;
        for (int k = 0; k < 2 * c; ++k) {
          d_a[k] = d_field.amplitude(k, y, x);
          d_f[k] = d_raw(k, y, x);
        }
        const auto ra = std::span<const T>(residuals.amplitude_trunk)
                            .subspan(cell * amplitude_.residual_size(), amplitude_.residual_size());
        const auto rf = std::span<const T>(residuals.frequency_trunk)
                            .subspan(cell * frequency_.residual_size(), frequency_.residual_size());
        amplitude_.backward(store, ra, d_a, dz);
        for (int k = 0; k < c; ++k) d_latent(k, y, x) += dz[k];
        frequency_.backward(store, rf, d_f, dz);
        for (int k = 0; k < c; ++k) d_latent(k, y, x) += dz[k];
      }
    }
    return d_latent;
  }

 private:
  void gather(const FourierField<T>& field, int cx, int cy, std::span<T> amp, std::span<T> freq) const {
    for (int k = 0; k < 2 * cfg_.channels; ++k) {
      amp[k] = field.amplitude(k, cy, cx);
      freq[k] = field.frequency(k, cy, cx);
    }
  }

  FourierMapperConfig cfg_;
  Siren<T> amplitude_;
  Siren<T> frequency_;
  Conv3x3<T> frequency_conv_;
  Linear<T> projection_;
};

}  // namespace bfstvsr
