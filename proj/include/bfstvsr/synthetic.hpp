#pragma once

// Translating band-limited textures with exact motion. Frames can be rendered
// analytically at any time and any scale, so ground truth for arbitrary
// (t, s) queries and the motion oracle come from the same closed form.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "bfstvsr/grid.hpp"
#include "bfstvsr/rng.hpp"

namespace bfstvsr {

// Half the Nyquist rate, in cycles per LR pixel.
inline constexpr double kMaxTextureFrequency = 0.25;
inline constexpr double kMaxVelocity = 2.0;

struct TextureComponent {
  double fx = 0.0;  // cycles per LR pixel
  double fy = 0.0;
  double phase = 0.0;
  std::array<double, 3> amplitude{0.0, 0.0, 0.0};
};

struct ClipSpec {
  int height = 12;
  int width = 12;
  int frames = 3;    // samples at i / (frames - 1)
  double vx = 0.0;   // LR pixels per frame
  double vy = 0.0;
  std::vector<TextureComponent> texture;

  /// Frame intervals between reference 0 and reference 1.
  double span() const { return frames - 1; }

  void validate() const {
    if (height < 2 || width < 2) throw std::invalid_argument("ClipSpec: frames must be at least 2x2");
    if (frames < 2) throw std::invalid_argument("ClipSpec: need at least 2 frames");
    if (std::hypot(vx, vy) > kMaxVelocity + 1e-12) {
      throw std::invalid_argument("ClipSpec: |v| exceeds " + std::to_string(kMaxVelocity) + " px/frame");
    }
    double total = 0.0;
    for (const auto& c : texture) {
      if (std::hypot(c.fx, c.fy) > kMaxTextureFrequency + 1e-12) {
        throw std::invalid_argument("ClipSpec: texture frequency above Nyquist/2");
      }
      total += std::max({std::abs(c.amplitude[0]), std::abs(c.amplitude[1]), std::abs(c.amplitude[2])});
    }
    if (total > 0.5 + 1e-12) throw std::invalid_argument("ClipSpec: texture amplitudes leave [0, 1]");
  }
};

/// Texture value of channel ch at continuous LR position (x, y).
inline double texture_value(const ClipSpec& spec, int ch, double x, double y) {
  double v = 0.5;
  for (const auto& c : spec.texture) {
    v += c.amplitude[ch] * std::cos(2.0 * std::numbers::pi * (c.fx * x + c.fy * y) + c.phase);
  }
  return v;
}

/// Frame at time t on the HR lattice of scale s (s = 1 gives the LR frame).
template <class T>
FeatureGrid<T> render_frame(const ClipSpec& spec, double t, double scale = 1.0) {
  check_scale(scale);
  const int h = scaled_extent(spec.height, scale);
  const int w = scaled_extent(spec.width, scale);
  const double ox = spec.vx * t * spec.span();
  const double oy = spec.vy * t * spec.span();
  FeatureGrid<T> out(3, h, w);
  for (int i = 0; i < h; ++i) {
    const double y = hr_to_lr(i, scale) - oy;
    for (int j = 0; j < w; ++j) {
      const double x = hr_to_lr(j, scale) - ox;
      for (int ch = 0; ch < 3; ++ch) out(ch, i, j) = static_cast<T>(texture_value(spec, ch, x, y));
    }
  }
  return out;
}

/// Forward motion from reference r (time r) to t, in pixels of the scale-s lattice.
inline std::array<double, 2> oracle_motion(const ClipSpec& spec, int r, double t, double scale = 1.0) {
  const double k = (t - r) * spec.span() * scale;
  return {k * spec.vx, k * spec.vy};
}

template <class T>
FeatureGrid<T> oracle_flow(const ClipSpec& spec, int r, double t, double scale = 1.0) {
  const auto m = oracle_motion(spec, r, t, scale);
  FeatureGrid<T> out(2, scaled_extent(spec.height, scale), scaled_extent(spec.width, scale));
  const std::size_t plane = out.plane_size();
  for (std::size_t p = 0; p < plane; ++p) {
    out.data()[p] = static_cast<T>(m[0]);
    out.data()[plane + p] = static_cast<T>(m[1]);
  }
  return out;
}

/// Random texture of `components` cosines; amplitudes sum to at most 0.45.
inline std::vector<TextureComponent> random_texture(Rng& rng, int components,
                                                    double max_frequency = kMaxTextureFrequency) {
  if (components < 1) throw std::invalid_argument("random_texture: need at least one component");
  std::vector<TextureComponent> tex(components);
  const double budget = 0.45 / components;
  for (auto& c : tex) {
    const double f = rng.uniform(0.25, 1.0) * max_frequency;
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    c.fx = f * std::cos(angle);
    c.fy = f * std::sin(angle);
    c.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (auto& a : c.amplitude) a = budget * rng.uniform(0.3, 1.0);
  }
  return tex;
}

struct SyntheticClip {
  ClipSpec spec;
  std::vector<double> times;
  std::vector<FeatureGrid<double>> frames;
  // For every interior time: motion from reference 0 and from reference 1.
  std::vector<std::array<FeatureGrid<double>, 2>> gt_flows;
};

/// Samples the clip's frames and oracle flows; an empty texture is drawn from
/// `seed`.
inline SyntheticClip make_clip(ClipSpec spec, std::uint64_t seed, int texture_components = 4) {
  if (spec.texture.empty()) {
    Rng rng(seed);
    spec.texture = random_texture(rng, texture_components);
  }
  spec.validate();
  SyntheticClip clip;
  clip.spec = spec;
  for (int i = 0; i < spec.frames; ++i) {
    const double t = static_cast<double>(i) / (spec.frames - 1);
    clip.times.push_back(t);
    clip.frames.push_back(render_frame<double>(spec, t));
    if (i > 0 && i + 1 < spec.frames) {
      clip.gt_flows.push_back({oracle_flow<double>(spec, 0, t), oracle_flow<double>(spec, 1, t)});
    }
  }
  return clip;
}

/// Random clip spec with speed at most `max_speed`.
inline ClipSpec random_clip_spec(Rng& rng, int height, int width, int frames, double max_speed,
                                 int texture_components = 4) {
  ClipSpec spec;
  spec.height = height;
  spec.width = width;
  spec.frames = frames;
  const double speed = max_speed * std::sqrt(rng.uniform());
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  spec.vx = speed * std::cos(angle);
  spec.vy = speed * std::sin(angle);
  spec.texture = random_texture(rng, texture_components);
  return spec;
}

/// Dihedral augmentation expressed on the spec: mirroring and transposing the
/// texture and motion is equivalent to flipping/rotating every frame and flow.
struct Augmentation {
  bool flip_x = false;
  bool flip_y = false;
  bool transpose = false;

  static Augmentation random(Rng& rng) { return {rng.bernoulli(0.5), rng.bernoulli(0.5), rng.bernoulli(0.5)}; }
};

inline ClipSpec augment(ClipSpec spec, const Augmentation& a) {
  // Mirroring x about the frame centre: x -> (W - 1) - x.
  if (a.flip_x) {
    for (auto& c : spec.texture) {
      c.phase += 2.0 * std::numbers::pi * c.fx * (spec.width - 1);
      c.fx = -c.fx;
    }
    spec.vx = -spec.vx;
  }
  if (a.flip_y) {
    for (auto& c : spec.texture) {
      c.phase += 2.0 * std::numbers::pi * c.fy * (spec.height - 1);
      c.fy = -c.fy;
    }
    spec.vy = -spec.vy;
  }
  if (a.transpose) {
    for (auto& c : spec.texture) std::swap(c.fx, c.fy);
    std::swap(spec.vx, spec.vy);
    std::swap(spec.height, spec.width);
  }
  return spec;
}

}  // namespace bfstvsr
