#pragma once

// End-to-end interpolation model: encoder -> Fourier mapper (spatial) and
// B-spline mapper (temporal) per high-resolution query -> softmax splatting
// of both references to time t -> per-pixel decoder.
//
// Inference is split into prepare() (everything independent of t) and
// render() (motion projection, splatting, decoding for one t), which is what
// makes multi-timestep interpolation cheap.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bfstvsr/bspline.hpp"
#include "bfstvsr/encoder.hpp"
#include "bfstvsr/fourier.hpp"
#include "bfstvsr/grid.hpp"
#include "bfstvsr/losses.hpp"
#include "bfstvsr/parallel.hpp"
#include "bfstvsr/param_store.hpp"
#include "bfstvsr/rng.hpp"
#include "bfstvsr/siren.hpp"
#include "bfstvsr/splatting.hpp"

namespace bfstvsr {

struct ModelConfig {
  int channels = 16;
  std::vector<int> mapper_hidden = {32, 32, 32};
  int decoder_hidden = 64;
  double omega0 = 30.0;
  double encoder_omega = 1.0;
  int encoder_dilation = 1;
  double max_displacement_ratio = 0.5;  // of min(H_L, W_L), in LR pixels
  double frame_interval = 1.0;          // g, input to the dilation estimator
  std::uint64_t seed = 1;

  static ModelConfig desk() { return ModelConfig{}; }

  static ModelConfig paper() {
    ModelConfig c;
    c.channels = 64;
    c.mapper_hidden = {64, 64, 256};
    c.decoder_hidden = 64;
    return c;
  }

  void validate() const {
    if (channels < 4) throw std::invalid_argument("ModelConfig: channels must be >= 4");
    if (mapper_hidden.empty()) throw std::invalid_argument("ModelConfig: mapper_hidden must not be empty");
    for (int h : mapper_hidden) {
      if (h <= 0) throw std::invalid_argument("ModelConfig: mapper_hidden entries must be positive");
    }
    if (decoder_hidden <= 0) throw std::invalid_argument("ModelConfig: decoder_hidden must be positive");
    if (encoder_dilation <= 0) throw std::invalid_argument("ModelConfig: encoder_dilation must be positive");
    if (!(max_displacement_ratio > 0.0)) throw std::invalid_argument("ModelConfig: max_displacement_ratio must be > 0");
    if (!(frame_interval > 0.0)) throw std::invalid_argument("ModelConfig: frame_interval must be > 0");
  }
};

/// Everything about an input pair that does not depend on the target time.
template <class T>
struct Prepared {
  double scale = 1.0;
  int lr_height = 0;
  int lr_width = 0;
  int hr_height = 0;
  int hr_width = 0;
  double max_displacement = 0.0;
  LatentTriple<T> latents;
  std::vector<LocalLookup> lookups;           // per HR pixel, row-major
  std::array<FeatureGrid<T>, 2> hr_features;  // F_0^H, F_1^H
  FeatureGrid<T> f01_hr;                      // nearest-upsampled F_(0,1)
  std::vector<T> decoder_prefix;              // per pixel: first decoder layer with the F_(0,1) part applied
  std::vector<T> dilation;                    // C, shared by every query
  std::array<std::vector<T>, 2> coefficients; // per reference, pixel-major (pixel * C + i)
  std::array<std::vector<T>, 2> knots;

  std::size_t pixel_count() const { return static_cast<std::size_t>(hr_height) * hr_width; }
};

/// Reliability-weighted blend of two splat results by their weight sums.
template <class T>
FeatureGrid<T> merge_references(const SplatResult<T>& a, const SplatResult<T>& b,
                                std::vector<std::uint8_t>* hole_mask = nullptr) {
  const int c = a.features.channels();
  const std::size_t plane = a.features.plane_size();
  FeatureGrid<T> out(c, a.features.height(), a.features.width());
  if (hole_mask != nullptr) hole_mask->assign(plane, 0);
  for (std::size_t p = 0; p < plane; ++p) {
    const double d0 = a.weight_sum.data()[p];
    const double d1 = b.weight_sum.data()[p];
    if (d0 + d1 < kHoleEps) {
      if (hole_mask != nullptr) (*hole_mask)[p] = 1;
      continue;
    }
    const double s = d0 + d1 + kSplatEps;
    for (int k = 0; k < c; ++k) {
      const std::size_t i = k * plane + p;
      out.data()[i] = static_cast<T>((d0 * a.features.data()[i] + d1 * b.features.data()[i]) / s);
    }
  }
  return out;
}

template <class T>
struct TrainTarget {
  double t = 0.5;
  FeatureGrid<T> frame;  // 3 x H_s x W_s ground truth
  // Oracle forward motion from reference 0 and 1 to t, HR pixels (2 x H_s x W_s).
  std::optional<std::array<FeatureGrid<T>, 2>> oracle_flows;
  // Splat with the oracle motion instead of the predicted one.
  std::array<bool, 2> substitute{false, false};
};

template <class T>
struct TrainExample {
  FeatureGrid<T> frame0;
  FeatureGrid<T> frame1;
  double scale = 2.0;
  std::vector<TrainTarget<T>> targets;
};

struct LossOptions {
  double lambda = 0.0;  // flow supervision weight; 0 drops the flow term
  double charbonnier_eps = kCharbonnierEps;
  double weight = 1.0;  // scales loss and gradients (e.g. 1 / batch size)
};

struct LossBreakdown {
  double total = 0.0;
  double frame = 0.0;
  double flow = 0.0;
};

template <class T>
class Model {
 public:
  explicit Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const int c = cfg_.channels;
    encoder_ = Encoder<T>(params_, "encoder", EncoderConfig{c, cfg_.encoder_dilation, cfg_.encoder_omega});
    bspline_ = BSplineMapper<T>(params_, "bspline", BSplineMapperConfig{c, cfg_.mapper_hidden, cfg_.omega0});
    fourier_ = FourierMapper<T>(params_, "fourier", FourierMapperConfig{c, cfg_.mapper_hidden, cfg_.omega0});
    SirenConfig dec;
    dec.layer_dims = {2 * c + 1, cfg_.decoder_hidden, cfg_.decoder_hidden, 3};
    dec.omega0 = dec.omega_hidden = cfg_.omega0;
    decoder_ = Siren<T>(params_, "decoder", dec);
    init(cfg_.seed);
  }

  void init(std::uint64_t seed) {
    encoder_.init(params_, mix_seed(seed, 11));
    bspline_.init(params_, mix_seed(seed, 12));
    fourier_.init(params_, mix_seed(seed, 13));
    decoder_.init(params_, mix_seed(seed, 14));
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  const Encoder<T>& encoder() const { return encoder_; }
  const BSplineMapper<T>& bspline_mapper() const { return bspline_; }
  const FourierMapper<T>& fourier_mapper() const { return fourier_; }
  const Siren<T>& decoder() const { return decoder_; }

  /// Worker cap for per-pixel loops; outputs do not depend on it.
  void set_threads(int threads) { threads_ = std::max(1, threads); }
  int threads() const { return threads_; }

  /// Number of batched representation-prediction passes run so far.
  std::uint64_t predict_rep_calls() const { return predict_rep_calls_; }

  double max_displacement(int lr_height, int lr_width) const {
    return cfg_.max_displacement_ratio * std::min(lr_height, lr_width);
  }

  LatentTriple<T> encode(const FeatureGrid<T>& frame0, const FeatureGrid<T>& frame1) const {
    return encoder_.encode(params_, frame0, frame1);
  }

  /// Decoder output before the final clamp.
  std::array<T, 3> decode_raw(std::span<const T> f_t, std::span<const T> f01, double t) const {
    const int c = cfg_.channels;
    if (static_cast<int>(f_t.size()) != c || static_cast<int>(f01.size()) != c) {
      throw std::invalid_argument("decode: feature vectors must have C entries");
    }
    std::vector<T> x = decoder_input(f_t, f01, t);
    std::vector<T> residual(decoder_.residual_size());
    std::array<T, 3> rgb{};
    decoder_.forward(params_, x, rgb, residual);
    return rgb;
  }

  std::array<T, 3> decode(std::span<const T> f_t, std::span<const T> f01, double t) const {
    auto rgb = decode_raw(f_t, f01, t);
    for (auto& v : rgb) v = std::clamp(v, T(0), T(1));
    return rgb;
  }

  Prepared<T> prepare(const FeatureGrid<T>& frame0, const FeatureGrid<T>& frame1, double scale) const {
    return prepare_latents(encode(frame0, frame1), scale);
  }

  /// Fourier features, decoder prefix and spline representations for every
  /// high-resolution query of both references.
  Prepared<T> prepare_latents(LatentTriple<T> latents, double scale) const {
    check_scale(scale);
    const int c = cfg_.channels;
    Prepared<T> p;
    p.scale = scale;
    p.lr_height = latents.f0.height();
    p.lr_width = latents.f0.width();
    p.hr_height = scaled_extent(p.lr_height, scale);
    p.hr_width = scaled_extent(p.lr_width, scale);
    p.max_displacement = max_displacement(p.lr_height, p.lr_width);
    p.lookups = hr_lookups(p.lr_height, p.lr_width, scale);
    const std::size_t n = p.pixel_count();

    std::array<FourierField<T>, 2> fields{fourier_.estimate_field(params_, latents.f0),
                                          fourier_.estimate_field(params_, latents.f1)};
    p.f01_hr = nearest_upsample(latents.f01, scale);
    p.dilation = bspline_.dilation(params_, cfg_.frame_interval);
    const int hidden = decoder_.first_width();
    p.decoder_prefix.assign(n * hidden, T(0));
    for (int r = 0; r < 2; ++r) {
      p.hr_features[r] = FeatureGrid<T>(c, p.hr_height, p.hr_width);
      p.coefficients[r].assign(n * c, T(0));
      p.knots[r].assign(n * c, T(0));
    }
    const std::size_t plane = n;
    parallel_for(n, threads_, [&](std::size_t begin, std::size_t end) {
      std::vector<T> out(c);
      std::vector<T> z(c);
      std::vector<T> f01(c);
      std::vector<T> x(2 * c + 1, T(0));
      std::vector<T> residual(bspline_.residual_size());
      BSplineMotionRep<T> rep;
      for (std::size_t i = begin; i < end; ++i) {
        const auto& lk = p.lookups[i];
        for (int r = 0; r < 2; ++r) {
          const auto& lat = r == 0 ? latents.f0 : latents.f1;
          fourier_.query_feature(params_, fields[r], lk.cell_x, lk.cell_y, lk.delta_x, lk.delta_y, out);
          for (int k = 0; k < c; ++k) p.hr_features[r].data()[k * plane + i] = out[k];
          for (int k = 0; k < c; ++k) z[k] = lat(k, lk.cell_y, lk.cell_x);
          bspline_.predict_rep(params_, z, lk.delta_x, lk.delta_y, p.dilation, rep, residual);
          std::ranges::copy(rep.coefficients, p.coefficients[r].begin() + i * c);
          std::ranges::copy(rep.knots, p.knots[r].begin() + i * c);
        }
        for (int k = 0; k < c; ++k) x[k] = p.f01_hr.data()[k * plane + i];
        auto prefix = std::span<T>(p.decoder_prefix).subspan(i * hidden, hidden);
        decoder_.first_layer_bias(params_, prefix);
        decoder_.first_layer_accumulate(params_, x, 0, c, prefix);
      }
    });
    p.latents = std::move(latents);
    ++predict_rep_calls_;
    return p;
  }

  /// Motion and reliability fields of reference r at time t.
  void motion_fields(const Prepared<T>& p, int r, double t, FeatureGrid<T>& motion, FeatureGrid<T>& logits) const {
    const int c = cfg_.channels;
    const std::size_t n = p.pixel_count();
    const double t_hat = std::abs(t - r);
    motion = FeatureGrid<T>(2, p.hr_height, p.hr_width);
    logits = FeatureGrid<T>(1, p.hr_height, p.hr_width);
    parallel_for(n, threads_, [&](std::size_t begin, std::size_t end) {
      std::vector<T> basis(c);
      for (std::size_t i = begin; i < end; ++i) {
        const auto coef = std::span<const T>(p.coefficients[r]).subspan(i * c, c);
        const auto knot = std::span<const T>(p.knots[r]).subspan(i * c, c);
        const auto m = bspline_.motion_at(params_, coef, knot, p.dilation, t_hat, p.scale, p.max_displacement, basis);
        motion.data()[i] = m.dx;
        motion.data()[n + i] = m.dy;
        logits.data()[i] = m.reliability;
      }
    });
  }

  /// Warped, merged feature F_t^H at time t.
  FeatureGrid<T> warped_features(const Prepared<T>& p, double t, std::vector<std::uint8_t>* hole_mask = nullptr) const {
    std::array<FeatureGrid<T>, 2> motion;
    std::array<FeatureGrid<T>, 2> logits;
    for (int r = 0; r < 2; ++r) motion_fields(p, r, t, motion[r], logits[r]);
    const double shift = std::max(max_logit(logits[0]), max_logit(logits[1]));
    const auto s0 = splat_forward(p.hr_features[0], motion[0], logits[0], kSplatEps, shift);
    const auto s1 = splat_forward(p.hr_features[1], motion[1], logits[1], kSplatEps, shift);
    return merge_references(s0, s1, hole_mask);
  }

  FeatureGrid<T> render(const Prepared<T>& p, double t) const {
    check_time(t);
    const int c = cfg_.channels;
    const std::size_t n = p.pixel_count();
    const auto f_t = warped_features(p, t);
    const int hidden = decoder_.first_width();
    FeatureGrid<T> out(3, p.hr_height, p.hr_width);
    parallel_for(n, threads_, [&](std::size_t begin, std::size_t end) {
      std::vector<T> x(2 * c + 1);
      std::vector<T> acc(hidden);
      std::vector<T> residual(decoder_.residual_size());
      std::array<T, 3> rgb{};
      for (std::size_t i = begin; i < end; ++i) {
        for (int k = 0; k < c; ++k) {
          x[k] = p.f01_hr.data()[k * n + i];
          x[c + k] = f_t.data()[k * n + i];
        }
        x[2 * c] = static_cast<T>(t);
        const auto prefix = std::span<const T>(p.decoder_prefix).subspan(i * hidden, hidden);
        std::ranges::copy(prefix, acc.begin());
        decoder_.first_layer_accumulate(params_, x, c, 2 * c + 1, acc);
        decoder_.forward_from_first(params_, x, acc, rgb, residual);
        for (int k = 0; k < 3; ++k) out.data()[k * n + i] = std::clamp(rgb[k], T(0), T(1));
      }
    });
    return out;
  }

  FeatureGrid<T> interpolate_frame(const FeatureGrid<T>& frame0, const FeatureGrid<T>& frame1, double t,
                                   double scale) const {
    check_time(t);
    return render(prepare(frame0, frame1, scale), t);
  }

  /// Shares one prepare() across all times; bit-identical to per-frame calls.
  std::vector<FeatureGrid<T>> interpolate_sequence(const FeatureGrid<T>& frame0, const FeatureGrid<T>& frame1,
                                                   std::span<const double> times, double scale) const {
    for (double t : times) check_time(t);
    std::vector<FeatureGrid<T>> frames;
    if (times.empty()) return frames;
    const auto p = prepare(frame0, frame1, scale);
    for (double t : times) frames.push_back(render(p, t));
    return frames;
  }

  /// Forward and backward for one example. Gradients are added to params().
  LossBreakdown loss_and_grad(const TrainExample<T>& ex, const LossOptions& opt) { return run_loss(ex, opt, true); }

  /// Forward only; params() gradients are untouched.
  LossBreakdown loss(const TrainExample<T>& ex, const LossOptions& opt) { return run_loss(ex, opt, false); }

 private:
  LossBreakdown run_loss(const TrainExample<T>& ex, const LossOptions& opt, bool backward) {
    if (ex.targets.empty()) throw std::invalid_argument("loss_and_grad: no targets");
    const int c = cfg_.channels;
    const double scale = ex.scale;
    check_scale(scale);

    typename Encoder<T>::Residuals enc_res;
    auto latents = encoder_.encode(params_, ex.frame0, ex.frame1, &enc_res);
    const int lr_h = latents.f0.height();
    const int lr_w = latents.f0.width();
    const int hr_h = scaled_extent(lr_h, scale);
    const int hr_w = scaled_extent(lr_w, scale);
    const double max_disp = max_displacement(lr_h, lr_w);
    const auto lookups = hr_lookups(lr_h, lr_w, scale);
    const std::size_t n = lookups.size();
    const int c2 = 2 * c;

    // Time-independent forward with residuals.
    std::array<FourierFieldResiduals<T>, 2> field_res;
    std::array<FourierField<T>, 2> fields{fourier_.estimate_field(params_, latents.f0, &field_res[0]),
                                          fourier_.estimate_field(params_, latents.f1, &field_res[1])};
    const auto dilation = bspline_.dilation(params_, cfg_.frame_interval);
    const std::size_t rep_res = bspline_.residual_size();
    std::array<FeatureGrid<T>, 2> hr_features{FeatureGrid<T>(c, hr_h, hr_w), FeatureGrid<T>(c, hr_h, hr_w)};
    std::array<std::vector<T>, 2> embeddings;
    std::array<std::vector<T>, 2> coefs;
    std::array<std::vector<T>, 2> knots;
    std::array<std::vector<T>, 2> trunk_res;
    {
      std::vector<T> out(c);
      std::vector<T> z(c);
      BSplineMotionRep<T> rep;
      for (int r = 0; r < 2; ++r) {
        const auto& lat = r == 0 ? latents.f0 : latents.f1;
        embeddings[r].assign(n * c2, T(0));
        coefs[r].assign(n * c, T(0));
        knots[r].assign(n * c, T(0));
        trunk_res[r].assign(n * rep_res, T(0));
        for (std::size_t i = 0; i < n; ++i) {
          const auto& lk = lookups[i];
          fourier_.query_feature(params_, fields[r], lk.cell_x, lk.cell_y, lk.delta_x, lk.delta_y, out,
                                 std::span<T>(embeddings[r]).subspan(i * c2, c2));
          for (int k = 0; k < c; ++k) hr_features[r].data()[k * n + i] = out[k];
          for (int k = 0; k < c; ++k) z[k] = lat(k, lk.cell_y, lk.cell_x);
          bspline_.predict_rep(params_, z, lk.delta_x, lk.delta_y, dilation, rep,
                               std::span<T>(trunk_res[r]).subspan(i * rep_res, rep_res));
          std::ranges::copy(rep.coefficients, coefs[r].begin() + i * c);
          std::ranges::copy(rep.knots, knots[r].begin() + i * c);
        }
      }
    }
    const auto f01_hr = nearest_upsample(latents.f01, scale);

    // Gradient accumulators shared across targets.
    std::array<FeatureGrid<T>, 2> d_hr_features{FeatureGrid<T>(c, hr_h, hr_w), FeatureGrid<T>(c, hr_h, hr_w)};
    FeatureGrid<T> d_f01_hr(c, hr_h, hr_w);
    std::array<std::vector<T>, 2> d_coefs{std::vector<T>(n * c, T(0)), std::vector<T>(n * c, T(0))};
    std::array<std::vector<T>, 2> d_knots{std::vector<T>(n * c, T(0)), std::vector<T>(n * c, T(0))};
    std::vector<T> d_dilation(c, T(0));

    LossBreakdown loss;
    const double target_weight = opt.weight / static_cast<double>(ex.targets.size());
    for (const auto& target : ex.targets) {
      check_time(target.t);
      if (target.frame.channels() != 3 || target.frame.height() != hr_h || target.frame.width() != hr_w) {
        throw std::invalid_argument("loss_and_grad: target frame shape does not match the scaled input");
      }
      const bool use_flows = target.oracle_flows.has_value();
      if ((target.substitute[0] || target.substitute[1]) && !use_flows) {
        throw std::invalid_argument("loss_and_grad: substitution requires oracle flows");
      }

      // Motion for both references.
      std::array<FeatureGrid<T>, 2> motion{FeatureGrid<T>(2, hr_h, hr_w), FeatureGrid<T>(2, hr_h, hr_w)};
      std::array<FeatureGrid<T>, 2> logits{FeatureGrid<T>(1, hr_h, hr_w), FeatureGrid<T>(1, hr_h, hr_w)};
      std::array<std::vector<T>, 2> bases{std::vector<T>(n * c), std::vector<T>(n * c)};
      for (int r = 0; r < 2; ++r) {
        const double t_hat = std::abs(target.t - r);
        for (std::size_t i = 0; i < n; ++i) {
          const auto m = bspline_.motion_at(params_, std::span<const T>(coefs[r]).subspan(i * c, c),
                                            std::span<const T>(knots[r]).subspan(i * c, c), dilation, t_hat, scale,
                                            max_disp, std::span<T>(bases[r]).subspan(i * c, c));
          motion[r].data()[i] = m.dx;
          motion[r].data()[n + i] = m.dy;
          logits[r].data()[i] = m.reliability;
        }
      }
      std::array<const FeatureGrid<T>*, 2> splat_motion{&motion[0], &motion[1]};
      for (int r = 0; r < 2; ++r) {
        if (target.substitute[r]) splat_motion[r] = &(*target.oracle_flows)[r];
      }
      const double max0 = max_logit(logits[0]);
      const double max1 = max_logit(logits[1]);
      const double shift = std::max(max0, max1);
      std::array<SplatResult<T>, 2> splats{
          splat_forward(hr_features[0], *splat_motion[0], logits[0], kSplatEps, shift),
          splat_forward(hr_features[1], *splat_motion[1], logits[1], kSplatEps, shift)};
      std::vector<std::uint8_t> merged_holes;
      const auto f_t = merge_references(splats[0], splats[1], &merged_holes);

      // Decode.
      FeatureGrid<T> pred(3, hr_h, hr_w);
      const std::size_t dec_res = decoder_.residual_size();
      std::vector<T> dec_residuals(n * dec_res);
      {
        std::array<T, 3> rgb{};
        for (std::size_t i = 0; i < n; ++i) {
          std::vector<T> x(c2 + 1);
          for (int k = 0; k < c; ++k) {
            x[k] = f01_hr.data()[k * n + i];
            x[c + k] = f_t.data()[k * n + i];
          }
          x[c2] = static_cast<T>(target.t);
          decoder_.forward(params_, x, rgb, std::span<T>(dec_residuals).subspan(i * dec_res, dec_res));
          for (int k = 0; k < 3; ++k) pred.data()[k * n + i] = rgb[k];
        }
      }

      // Loss.
      const double frame_loss = charbonnier(pred, target.frame, opt.charbonnier_eps);
      double flow_loss = 0.0;
      if (use_flows && opt.lambda > 0.0) {
        for (int r = 0; r < 2; ++r) flow_loss += charbonnier(motion[r], (*target.oracle_flows)[r], opt.charbonnier_eps);
      }
      loss.frame += target_weight * frame_loss;
      loss.flow += target_weight * opt.lambda * flow_loss;
      if (!backward) continue;

      // Backward: decoder.
      FeatureGrid<T> d_pred(3, hr_h, hr_w);
      charbonnier_backward<T>(pred.data(), target.frame.data(), opt.charbonnier_eps, target_weight, d_pred.data());
      FeatureGrid<T> d_f_t(c, hr_h, hr_w);
      {
        std::vector<T> dx(c2 + 1);
        std::array<T, 3> dy{};
        for (std::size_t i = 0; i < n; ++i) {
          for (int k = 0; k < 3; ++k) dy[k] = d_pred.data()[k * n + i];
          decoder_.backward(params_, std::span<const T>(dec_residuals).subspan(i * dec_res, dec_res), dy, dx);
          for (int k = 0; k < c; ++k) {
            d_f01_hr.data()[k * n + i] += dx[k];
            d_f_t.data()[k * n + i] += dx[c + k];
          }
        }
      }

      // Merge backward.
      std::array<FeatureGrid<T>, 2> d_splat_out{FeatureGrid<T>(c, hr_h, hr_w), FeatureGrid<T>(c, hr_h, hr_w)};
      std::array<FeatureGrid<T>, 2> d_weight{FeatureGrid<T>(1, hr_h, hr_w), FeatureGrid<T>(1, hr_h, hr_w)};
      for (std::size_t p = 0; p < n; ++p) {
        if (merged_holes[p]) continue;
        const double d0 = splats[0].weight_sum.data()[p];
        const double d1 = splats[1].weight_sum.data()[p];
        const double s = d0 + d1 + kSplatEps;
        double g0 = 0.0;
        double g1 = 0.0;
        for (int k = 0; k < c; ++k) {
          const std::size_t idx = k * n + p;
          const double g = d_f_t.data()[idx];
          d_splat_out[0].data()[idx] = static_cast<T>(g * d0 / s);
          d_splat_out[1].data()[idx] = static_cast<T>(g * d1 / s);
          g0 += g * (splats[0].features.data()[idx] - f_t.data()[idx]) / s;
          g1 += g * (splats[1].features.data()[idx] - f_t.data()[idx]) / s;
        }
        d_weight[0].data()[p] = static_cast<T>(g0);
        d_weight[1].data()[p] = static_cast<T>(g1);
      }

      // Splat backward; the shared shift's gradient goes to the global argmax.
      std::array<FeatureGrid<T>, 2> d_motion;
      std::array<FeatureGrid<T>, 2> d_logits;
      double d_shift = 0.0;
      for (int r = 0; r < 2; ++r) {
        auto g = splat_backward(hr_features[r], *splat_motion[r], logits[r], splats[r], d_splat_out[r], static_cast<const FeatureGrid<T>*>(nullptr),
                                &d_weight[r], kSplatEps, false);
        for (std::size_t i = 0; i < g.d_features.size(); ++i) d_hr_features[r].data()[i] += g.d_features.data()[i];
        d_motion[r] = target.substitute[r] ? FeatureGrid<T>(2, hr_h, hr_w) : std::move(g.d_motion);
        d_logits[r] = std::move(g.d_logits);
        d_shift += g.d_shift;
      }
      {
        const int r = max0 >= max1 ? 0 : 1;
        const auto idx = argmax_logit(logits[r]);
        d_logits[r].data()[idx] = static_cast<T>(d_logits[r].data()[idx] + d_shift);
      }
      if (use_flows && opt.lambda > 0.0) {
        for (int r = 0; r < 2; ++r) {
          charbonnier_backward<T>(motion[r].data(), (*target.oracle_flows)[r].data(), opt.charbonnier_eps,
                                  target_weight * opt.lambda, d_motion[r].data());
        }
      }

      // Motion head + basis backward into the representation accumulators.
      for (int r = 0; r < 2; ++r) {
        const double t_hat = std::abs(target.t - r);
        for (std::size_t i = 0; i < n; ++i) {
          const MotionSample<T> dm{d_motion[r].data()[i], d_motion[r].data()[n + i], d_logits[r].data()[i]};
          bspline_.accumulate_head_backward(
              params_, std::span<const T>(coefs[r]).subspan(i * c, c), std::span<const T>(knots[r]).subspan(i * c, c),
              dilation, std::span<const T>(bases[r]).subspan(i * c, c), t_hat, scale, max_disp, dm,
              std::span<T>(d_coefs[r]).subspan(i * c, c), std::span<T>(d_knots[r]).subspan(i * c, c), d_dilation);
        }
      }
    }
    loss.total = loss.frame + loss.flow;
    if (!backward) return loss;

    // Time-independent backward.
    std::array<FeatureGrid<T>, 2> d_latent{FeatureGrid<T>(c, lr_h, lr_w), FeatureGrid<T>(c, lr_h, lr_w)};
    FeatureGrid<T> d_f01(c, lr_h, lr_w);
    for (int r = 0; r < 2; ++r) {
      FourierField<T> d_field{FeatureGrid<T>(c2, lr_h, lr_w), FeatureGrid<T>(c2, lr_h, lr_w)};
      std::vector<T> d_out(c);
      std::vector<T> d_z(c);
      for (std::size_t i = 0; i < n; ++i) {
        const auto& lk = lookups[i];
        for (int k = 0; k < c; ++k) d_out[k] = d_hr_features[r].data()[k * n + i];
        fourier_.query_backward(params_, fields[r], lk.cell_x, lk.cell_y, lk.delta_x, lk.delta_y,
                                std::span<const T>(embeddings[r]).subspan(i * c2, c2), d_out, d_field);
        std::ranges::fill(d_z, T(0));
        bspline_.rep_backward(params_, std::span<const T>(trunk_res[r]).subspan(i * rep_res, rep_res),
                              std::span<const T>(d_coefs[r]).subspan(i * c, c),
                              std::span<const T>(d_knots[r]).subspan(i * c, c), d_z);
        for (int k = 0; k < c; ++k) d_latent[r](k, lk.cell_y, lk.cell_x) += d_z[k];
        if (r == 0) {
          for (int k = 0; k < c; ++k) d_f01(k, lk.cell_y, lk.cell_x) += d_f01_hr.data()[k * n + i];
        }
      }
      const auto d_lat_field = fourier_.field_backward(params_, r == 0 ? latents.f0 : latents.f1, field_res[r], d_field);
      for (std::size_t i = 0; i < d_lat_field.size(); ++i) d_latent[r].data()[i] += d_lat_field.data()[i];
    }
    bspline_.dilation_backward(params_, d_dilation, cfg_.frame_interval);
    encoder_.backward(params_, enc_res, d_latent[0], d_f01, d_latent[1]);
    return loss;
  }

  static void check_time(double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("target time must lie in [0, 1], got " + std::to_string(t));
  }

  static std::vector<LocalLookup> hr_lookups(int lr_h, int lr_w, double scale) {
    const auto queries = make_query_grid(lr_h, lr_w, scale);
    std::vector<LocalLookup> out;
    out.reserve(queries.size());
    for (const auto& q : queries) out.push_back(nearest_cell(q, lr_h, lr_w));
    return out;
  }

  std::vector<T> decoder_input(std::span<const T> f_t, std::span<const T> f01, double t) const {
    const int c = cfg_.channels;
    std::vector<T> x(2 * c + 1);
    for (int k = 0; k < c; ++k) {
      x[k] = f01[k];
      x[c + k] = f_t[k];
    }
    x[2 * c] = static_cast<T>(t);
    return x;
  }

  ModelConfig cfg_;
  ParamStore<T> params_;
  Encoder<T> encoder_;
  BSplineMapper<T> bspline_;
  FourierMapper<T> fourier_;
  Siren<T> decoder_;
  int threads_ = 1;
  mutable std::uint64_t predict_rep_calls_ = 0;
};

}  // namespace bfstvsr
