#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "bfstvsr/param_store.hpp"

namespace bfstvsr {

template <class T>
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;

  /// Sizes the moment buffers for `params` (zero-initialized).
  void attach(const ParamStore<T>& params) {
    m.clear();
    v.clear();
    for (const auto& e : params.entries()) {
      m.emplace_back(e.value.size(), T(0));
      v.emplace_back(e.value.size(), T(0));
    }
  }
};

class NonFiniteGradient : public std::runtime_error {
 public:
  explicit NonFiniteGradient(const std::string& name)
      : std::runtime_error("non-finite gradient in parameter '" + name + "'"), parameter(name) {}
  std::string parameter;
};

/// Bias-corrected Adam update in place, then zeroes all gradients.
template <class T>
void adam_step(ParamStore<T>& params, AdamState<T>& state, double lr) {
  if (state.m.size() != params.size()) state.attach(params);
  for (const auto& e : params.entries()) {
    for (T g : e.grad) {
      if (!std::isfinite(static_cast<double>(g))) throw NonFiniteGradient(e.name);
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(state.beta1);
  const T b2 = static_cast<T>(state.beta2);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& e = params.entries()[k];
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const T g = e.grad[i];
      m[i] = b1 * m[i] + (T(1) - b1) * g;
      v[i] = b2 * v[i] + (T(1) - b2) * g * g;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      e.value[i] = static_cast<T>(e.value[i] - lr * m_hat / (std::sqrt(v_hat) + state.epsilon));
    }
  }
  params.zero_grad();
}

/// Cosine annealing with warm restarts every `period` iterations.
inline double cosine_lr(std::int64_t iteration, std::int64_t period, double lr_max, double lr_min) {
  if (period < 1) throw std::invalid_argument("cosine_lr: period must be >= 1");
  const double phase = static_cast<double>(iteration % period) / static_cast<double>(period);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * phase));
}

}  // namespace bfstvsr
