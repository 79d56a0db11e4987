#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "bfstvsr/param_store.hpp"

namespace bfstvsr {

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  bool flagged = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  bool passed = true;

  const GradCheckEntry* worst() const {
    const GradCheckEntry* w = nullptr;
    for (const auto& e : entries) {
      if (w == nullptr || e.max_rel_error > w->max_rel_error) w = &e;
    }
    return w;
  }
};

class NonDeterministicOperation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

/// Central-difference check of an operation's analytic gradients.
///
/// `loss_and_grad(params)` must return the scalar loss and accumulate
/// dL/dθ into `params` gradient buffers (which the checker zeroes first).
/// Inputs whose gradients should be checked are registered as parameters.
/// `loss_only(params)` evaluates L without touching gradients; it is used
/// for the perturbed evaluations.
template <class T, class Fn, class LossFn>
GradCheckReport grad_check(Fn&& loss_and_grad, LossFn&& loss_only, ParamStore<T>& params, double h, double tol) {
  if (!(h >= 1e-6 && h <= 1e-3)) throw std::invalid_argument("grad_check: step h must lie in [1e-6, 1e-3]");

  params.zero_grad();
  const T base = loss_and_grad(params);
  std::vector<std::vector<T>> analytic;
  for (const auto& e : params.entries()) analytic.push_back(e.grad);

  params.zero_grad();
  const T again = loss_and_grad(params);
  bool same = (again == base) || (std::isnan(base) && std::isnan(again));
  for (std::size_t k = 0; same && k < params.size(); ++k) same = params.entries()[k].grad == analytic[k];
  if (!same) throw NonDeterministicOperation("grad_check: two forward/backward passes disagree");

  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& e = params.entries()[k];
    GradCheckEntry entry{e.name, 0.0, 0, 0.0, 0.0, false};
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const T saved = e.value[i];
      e.value[i] = saved + static_cast<T>(h);
      const T plus = loss_only(params);
      e.value[i] = saved - static_cast<T>(h);
      const T minus = loss_only(params);
      e.value[i] = saved;
      const double numeric = static_cast<double>((plus - minus) / (2 * static_cast<T>(h)));
      const double err = relative_error(static_cast<double>(analytic[k][i]), numeric);
      if (err > entry.max_rel_error || i == 0) {
        entry.max_rel_error = err;
        entry.worst_index = i;
        entry.analytic = static_cast<double>(analytic[k][i]);
        entry.numeric = numeric;
      }
    }
    entry.flagged = entry.max_rel_error > tol;
    report.passed = report.passed && !entry.flagged;
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(entry);
  }
  // Leave the analytic gradients in place for callers that inspect them.
  params.zero_grad();
  for (std::size_t k = 0; k < params.size(); ++k) params.entries()[k].grad = analytic[k];
  return report;
}

template <class T, class Fn>
GradCheckReport grad_check(Fn&& loss_and_grad, ParamStore<T>& params, double h, double tol) {
  return grad_check(loss_and_grad, loss_and_grad, params, h, tol);
}

}  // namespace bfstvsr
