#pragma once

// Training loop on synthetic translating-texture clips: per-iteration sampling
// is seeded from (seed, iteration), so a resumed run replays exactly.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bfstvsr/checkpoint.hpp"
#include "bfstvsr/losses.hpp"
#include "bfstvsr/metrics.hpp"
#include "bfstvsr/optim.hpp"
#include "bfstvsr/pipeline.hpp"
#include "bfstvsr/rng.hpp"
#include "bfstvsr/synthetic.hpp"

namespace bfstvsr {

struct DataConfig {
  int patch = 12;          // LR patch side
  int frames = 3;          // clip frames; motion spans frames - 1 intervals
  double max_speed = 1.5;  // LR px per frame
  int texture_components = 4;
  int targets = 3;         // target times per sample, averaged into one loss
  bool augment = true;
};

struct TrainConfig {
  ModelConfig model;
  DataConfig data;
  std::int64_t iterations = 2000;
  int batch = 2;
  double lr_max = 1e-3;  // 1e-4 in the full-scale preset
  double lr_min = 1e-7;
  std::int64_t cosine_period = 500;
  double lambda = 0.01;  // 0 trains without flow supervision
  double charbonnier_eps = kCharbonnierEps;
  std::int64_t substitution_horizon = 500;
  double scale_min = 2.0;
  double scale_max = 4.0;
  std::uint64_t seed = 1;
  std::int64_t validate_every = 100;  // 0 disables psnr_val
  int validation_clips = 2;

  static TrainConfig desk() { return TrainConfig{}; }

  static TrainConfig paper() {
    TrainConfig c;
    c.model = ModelConfig::paper();
    c.lr_max = 1e-4;
    c.iterations = 600000;
    c.batch = 32;
    c.cosine_period = 150000;
    c.substitution_horizon = 150000;
    return c;
  }

  void validate() const {
    model.validate();
    if (iterations < 0) throw std::invalid_argument("TrainConfig: iterations must be >= 0");
    if (batch < 1) throw std::invalid_argument("TrainConfig: batch must be >= 1");
    if (lr_max < 0.0 || lr_min < 0.0 || lr_min > lr_max) {
      throw std::invalid_argument("TrainConfig: need 0 <= lr_min <= lr_max");
    }
    if (cosine_period < 1) throw std::invalid_argument("TrainConfig: cosine_period must be >= 1");
    if (lambda < 0.0) throw std::invalid_argument("TrainConfig: lambda must be >= 0");
    if (!(charbonnier_eps > 0.0)) throw std::invalid_argument("TrainConfig: charbonnier_eps must be > 0");
    if (substitution_horizon < 1) throw std::invalid_argument("TrainConfig: substitution_horizon must be >= 1");
    if (scale_min < 1.0 || scale_max < scale_min) throw std::invalid_argument("TrainConfig: need 1 <= scale_min <= scale_max");
    if (validate_every < 0) throw std::invalid_argument("TrainConfig: validate_every must be >= 0");
    if (validation_clips < 1) throw std::invalid_argument("TrainConfig: validation_clips must be >= 1");
    if (data.patch < 2 || data.frames < 2 || data.targets < 1 || data.texture_components < 1) {
      throw std::invalid_argument("TrainConfig: invalid data settings");
    }
    if (data.max_speed < 0.0 || data.max_speed > kMaxVelocity) {
      throw std::invalid_argument("TrainConfig: data.max_speed must lie in [0, 2]");
    }
  }
};

struct LossRow {
  std::int64_t iteration = 0;
  double lr = 0.0;
  double loss = 0.0;
  std::optional<double> psnr_val;
};

inline std::string loss_csv_header() { return "iteration,lr,loss,psnr_val"; }

inline std::string format_loss_row(const LossRow& r) {
  std::ostringstream os;
  os.precision(9);
  os << r.iteration << ',' << r.lr << ',' << r.loss << ',';
  if (r.psnr_val) os << *r.psnr_val;
  return os.str();
}

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::int64_t iter, const std::string& what)
      : std::runtime_error("training diverged at iteration " + std::to_string(iter) + ": " + what), iteration(iter) {}
  std::int64_t iteration;
};

/// One example as the trainer samples it at `iteration`, slot `b`.
template <class T>
TrainExample<T> sample_example(const TrainConfig& cfg, std::int64_t iteration, int b) {
  Rng rng(mix_seed(mix_seed(cfg.seed, static_cast<std::uint64_t>(iteration)), static_cast<std::uint64_t>(b)));
  const auto& d = cfg.data;
  auto spec = random_clip_spec(rng, d.patch, d.patch, d.frames, d.max_speed, d.texture_components);
  if (d.augment) spec = augment(spec, Augmentation::random(rng));
  TrainExample<T> ex;
  ex.scale = rng.uniform(cfg.scale_min, cfg.scale_max);
  ex.frame0 = render_frame<T>(spec, 0.0);
  ex.frame1 = render_frame<T>(spec, 1.0);
  const double p = substitution_prob(iteration, cfg.substitution_horizon);
  for (int k = 0; k < d.targets; ++k) {
    TrainTarget<T> target;
    target.t = rng.uniform(0.0, 1.0);
    target.frame = render_frame<T>(spec, target.t, ex.scale);
    target.oracle_flows = std::array<FeatureGrid<T>, 2>{oracle_flow<T>(spec, 0, target.t, ex.scale),
                                                        oracle_flow<T>(spec, 1, target.t, ex.scale)};
    target.substitute = {rng.bernoulli(p), rng.bernoulli(p)};
    ex.targets.push_back(std::move(target));
  }
  return ex;
}

/// Held-out clip specs drawn from a stream disjoint from training.
inline std::vector<ClipSpec> held_out_specs(std::uint64_t seed, int count, int size, int frames, double max_speed,
                                            int components = 4) {
  Rng rng(mix_seed(seed, 0x5EEDE7A1ull));
  std::vector<ClipSpec> specs;
  for (int i = 0; i < count; ++i) specs.push_back(random_clip_spec(rng, size, size, frames, max_speed, components));
  return specs;
}

struct EvalResult {
  double model_psnr = 0.0;
  double baseline_psnr = 0.0;
  double model_ssim = 0.0;
  double baseline_ssim = 0.0;
  int frames = 0;
};

/// Mean Y-PSNR/SSIM of the model and of the blend baseline over clips x times.
template <class T>
EvalResult evaluate(const Model<T>& model, const std::vector<ClipSpec>& specs, double scale,
                    const std::vector<double>& times, bool with_ssim = true) {
  EvalResult r;
  for (const auto& spec : specs) {
    const auto f0 = render_frame<T>(spec, 0.0);
    const auto f1 = render_frame<T>(spec, 1.0);
    const auto outs = model.interpolate_sequence(f0, f1, times, scale);
    for (std::size_t k = 0; k < times.size(); ++k) {
      const auto gt = render_frame<T>(spec, times[k], scale);
      const auto base = blend_baseline(f0, f1, times[k], scale);
      r.model_psnr += y_psnr(outs[k], gt);
      r.baseline_psnr += y_psnr(base, gt);
      if (with_ssim) {
        r.model_ssim += y_ssim(outs[k], gt);
        r.baseline_ssim += y_ssim(base, gt);
      }
      ++r.frames;
    }
  }
  if (r.frames > 0) {
    r.model_psnr /= r.frames;
    r.baseline_psnr /= r.frames;
    r.model_ssim /= r.frames;
    r.baseline_ssim /= r.frames;
  }
  return r;
}

class Trainer {
 public:
  explicit Trainer(TrainConfig cfg) : cfg_(std::move(cfg)), model_((cfg_.validate(), cfg_.model)) {
    adam_.attach(model_.params());
    validation_ = held_out_specs(mix_seed(cfg_.seed, 77), cfg_.validation_clips, cfg_.data.patch, cfg_.data.frames,
                                 cfg_.data.max_speed, cfg_.data.texture_components);
  }

  const TrainConfig& config() const { return cfg_; }
  Model<float>& model() { return model_; }
  const Model<float>& model() const { return model_; }
  const AdamState<float>& adam() const { return adam_; }
  std::int64_t iteration() const { return iteration_; }
  bool done() const { return iteration_ >= cfg_.iterations; }

  LossRow step() {
    const std::int64_t it = iteration_;
    const double lr = cosine_lr(it, cfg_.cosine_period, cfg_.lr_max, cfg_.lr_min);
    LossOptions opt;
    opt.lambda = cfg_.lambda;
    opt.charbonnier_eps = cfg_.charbonnier_eps;
    opt.weight = 1.0 / cfg_.batch;
    double loss = 0.0;
    model_.params().zero_grad();
    for (int b = 0; b < cfg_.batch; ++b) {
      const auto ex = sample_example<float>(cfg_, it, b);
      loss += model_.loss_and_grad(ex, opt).total;
    }
    if (!std::isfinite(loss)) throw TrainingDiverged(it, "loss is " + std::to_string(loss) + "; " + diagnostics());
    try {
      adam_step(model_.params(), adam_, lr);
    } catch (const NonFiniteGradient& e) {
      throw TrainingDiverged(it, e.what());
    }
    ++iteration_;
    LossRow row{it, lr, loss, std::nullopt};
    if (cfg_.validate_every > 0 && (iteration_ % cfg_.validate_every == 0 || iteration_ == cfg_.iterations)) {
      row.psnr_val = evaluate(model_, validation_, 2.0, {0.5}, false).model_psnr;
    }
    return row;
  }

  /// Runs to completion, reporting every row.
  void run(const std::function<void(const LossRow&)>& on_row = {}) {
    while (!done()) {
      const auto row = step();
      if (on_row) on_row(row);
    }
  }

  std::vector<NamedTensor> checkpoint_tensors() const {
    auto tensors = to_tensors(model_.params());
    tensors.push_back(model_config_tensor(cfg_.model));
    for (std::size_t k = 0; k < model_.params().size(); ++k) {
      const auto& e = model_.params().entries()[k];
      const auto n = static_cast<std::uint32_t>(e.value.size());
      tensors.push_back({"adam/m/" + e.name, {n}, adam_.m[k]});
      tensors.push_back({"adam/v/" + e.name, {n}, adam_.v[k]});
    }
    tensors.push_back({"train/state", {2}, {static_cast<float>(adam_.step), static_cast<float>(iteration_)}});
    return tensors;
  }

  void save(const std::filesystem::path& path) const { save_checkpoint(path, checkpoint_tensors()); }

  /// Restores parameters, optimizer moments and the iteration counter.
  void resume(const std::filesystem::path& path) {
    const auto tensors = load_checkpoint(path);
    if (model_config_from_tensors(tensors).channels != cfg_.model.channels) {
      throw CheckpointError("checkpoint model does not match the configured model");
    }
    from_tensors(tensors, model_.params());
    const NamedTensor* state = find_tensor(tensors, "train/state");
    if (state == nullptr || state->values.size() != 2) throw CheckpointError("checkpoint has no training state");
    for (std::size_t k = 0; k < model_.params().size(); ++k) {
      const auto& e = model_.params().entries()[k];
      const auto* m = find_tensor(tensors, "adam/m/" + e.name);
      const auto* v = find_tensor(tensors, "adam/v/" + e.name);
      if (m == nullptr || v == nullptr || m->values.size() != e.value.size() || v->values.size() != e.value.size()) {
        throw CheckpointError("checkpoint optimizer state missing for '" + e.name + "'");
      }
      adam_.m[k] = m->values;
      adam_.v[k] = v->values;
    }
    adam_.step = static_cast<std::int64_t>(state->values[0]);
    iteration_ = static_cast<std::int64_t>(state->values[1]);
  }

  static const NamedTensor* find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name) {
    for (const auto& t : tensors) {
      if (t.name == name) return &t;
    }
    return nullptr;
  }

  // Layout: version, C, decoder_hidden, omega0, encoder_omega, encoder_dilation,
  // max_displacement_ratio, frame_interval, n_hidden, hidden...
  static NamedTensor model_config_tensor(const ModelConfig& m) {
    std::vector<float> v{1.0f,
                         static_cast<float>(m.channels),
                         static_cast<float>(m.decoder_hidden),
                         static_cast<float>(m.omega0),
                         static_cast<float>(m.encoder_omega),
                         static_cast<float>(m.encoder_dilation),
                         static_cast<float>(m.max_displacement_ratio),
                         static_cast<float>(m.frame_interval),
                         static_cast<float>(m.mapper_hidden.size())};
    for (int h : m.mapper_hidden) v.push_back(static_cast<float>(h));
    return {"meta/model_config", {static_cast<std::uint32_t>(v.size())}, v};
  }

  static ModelConfig model_config_from_tensors(const std::vector<NamedTensor>& tensors) {
    const auto* t = find_tensor(tensors, "meta/model_config");
    if (t == nullptr || t->values.size() < 9 || t->values[0] != 1.0f) {
      throw CheckpointError("checkpoint has no model configuration");
    }
    const auto& v = t->values;
    ModelConfig m;
    m.channels = static_cast<int>(v[1]);
    m.decoder_hidden = static_cast<int>(v[2]);
    m.omega0 = v[3];
    m.encoder_omega = v[4];
    m.encoder_dilation = static_cast<int>(v[5]);
    m.max_displacement_ratio = v[6];
    m.frame_interval = v[7];
    const auto n = static_cast<std::size_t>(v[8]);
    if (v.size() != 9 + n) throw CheckpointError("malformed model configuration tensor");
    m.mapper_hidden.clear();
    for (std::size_t i = 0; i < n; ++i) m.mapper_hidden.push_back(static_cast<int>(v[9 + i]));
    m.validate();
    return m;
  }

 private:
  std::string diagnostics() const {
    std::ostringstream os;
    for (const auto& e : model_.params().entries()) {
      double max_abs = 0.0;
      bool finite = true;
      for (std::size_t i = 0; i < e.value.size(); ++i) {
        if (!std::isfinite(e.value[i]) || !std::isfinite(e.grad[i])) finite = false;
        max_abs = std::max(max_abs, std::abs(static_cast<double>(e.grad[i])));
      }
      if (!finite) os << e.name << " non-finite; ";
      else os << e.name << " max|grad|=" << max_abs << "; ";
    }
    return os.str();
  }

  TrainConfig cfg_;
  Model<float> model_;
  AdamState<float> adam_;
  std::vector<ClipSpec> validation_;
  std::int64_t iteration_ = 0;
};

/// Loads a model (config and weights) from a checkpoint.
inline Model<float> load_model(const std::filesystem::path& path) {
  const auto tensors = load_checkpoint(path);
  Model<float> model(Trainer::model_config_from_tensors(tensors));
  from_tensors(tensors, model.params());
  return model;
}

}  // namespace bfstvsr
