#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>

#include "bfstvsr/grid.hpp"

namespace bfstvsr {

inline constexpr double kCharbonnierEps = 1e-3;

/// Mean of sqrt(r^2 + eps^2) over all elements.
template <class T>
double charbonnier(std::span<const T> pred, std::span<const T> gt, double eps = kCharbonnierEps) {
  if (pred.size() != gt.size() || pred.empty()) throw std::invalid_argument("charbonnier: shape mismatch");
  if (!(eps > 0.0)) throw std::invalid_argument("charbonnier: eps must be positive");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = static_cast<double>(pred[i]) - static_cast<double>(gt[i]);
    sum += std::sqrt(r * r + eps * eps);
  }
  return sum / static_cast<double>(pred.size());
}

template <class T>
double charbonnier(const FeatureGrid<T>& pred, const FeatureGrid<T>& gt, double eps = kCharbonnierEps) {
  if (!pred.same_shape(gt)) throw std::invalid_argument("charbonnier: shape mismatch");
  return charbonnier<T>(pred.data(), gt.data(), eps);
}

/// d/dpred of charbonnier, scaled by `weight`, added into `d_pred`.
template <class T>
void charbonnier_backward(std::span<const T> pred, std::span<const T> gt, double eps, double weight,
                          std::span<T> d_pred) {
  const double inv_n = weight / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = static_cast<double>(pred[i]) - static_cast<double>(gt[i]);
    d_pred[i] += static_cast<T>(inv_n * r / std::sqrt(r * r + eps * eps));
  }
}

template <class T>
struct FlowPair {
  const FeatureGrid<T>* from0 = nullptr;
  const FeatureGrid<T>* from1 = nullptr;
};

/// Frame Charbonnier plus lambda * (sum of per-reference flow Charbonnier).
/// With lambda == 0 or no flows this is the frame term alone.
template <class T>
double total_loss(const FeatureGrid<T>& pred_frame, const FeatureGrid<T>& gt_frame, FlowPair<T> pred_flows,
                  FlowPair<T> oracle_flows, double lambda, double eps = kCharbonnierEps) {
  if (lambda < 0.0) throw std::invalid_argument("total_loss: lambda must be >= 0");
  const int given = (pred_flows.from0 != nullptr) + (pred_flows.from1 != nullptr) +
                    (oracle_flows.from0 != nullptr) + (oracle_flows.from1 != nullptr);
  if (given != 0 && given != 4) {
    throw std::invalid_argument("total_loss: flow terms need predicted and oracle flows for both references");
  }
  double loss = charbonnier(pred_frame, gt_frame, eps);
  if (given == 4 && lambda > 0.0) {
    loss += lambda * (charbonnier(*pred_flows.from0, *oracle_flows.from0, eps) +
                      charbonnier(*pred_flows.from1, *oracle_flows.from1, eps));
  }
  return loss;
}

/// Probability of substituting ground-truth motion: 1 at iteration 0,
/// decaying linearly to 0 at `horizon`.
inline double substitution_prob(std::int64_t iteration, std::int64_t horizon) {
  if (horizon < 1) throw std::invalid_argument("substitution_prob: horizon must be >= 1");
  return std::max(0.0, 1.0 - static_cast<double>(iteration) / static_cast<double>(horizon));
}

}  // namespace bfstvsr
