#include "moece/moe/routing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "moece/error.hpp"

namespace moece::moe {

RoutingDecision select_topk(std::span<const double> w, std::span<const double> u, std::size_t k) {
  const std::size_t r = w.size();
  if (u.size() != r) throw ShapeError("select_topk: bias length differs from weight length");
  if (k < 1 || k > r)
    throw ConfigError("select_topk: k=" + std::to_string(k) + " must be in [1, " + std::to_string(r) + "]");

  RoutingDecision d;
  d.w.assign(w.begin(), w.end());
  d.w_biased.resize(r);
  for (std::size_t i = 0; i < r; ++i) d.w_biased[i] = w[i] + u[i];

  std::vector<std::size_t> order(r);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return d.w_biased[a] > d.w_biased[b]; });
  d.selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));

  double mass = 0.0;
  for (auto i : d.selected) mass += w[i];
  d.w_prime.resize(k);
  if (mass == 0.0) {
    d.degenerate = true;
    std::fill(d.w_prime.begin(), d.w_prime.end(), 1.0 / static_cast<double>(k));
  } else {
    for (std::size_t j = 0; j < k; ++j) d.w_prime[j] = w[d.selected[j]] / mass;
  }
  return d;
}

void UsageStats::record(std::span<const std::size_t> selected) {
  for (auto i : selected) {
    if (i >= counts.size()) throw ShapeError("UsageStats: expert index out of range");
    ++counts[i];
  }
  ++window;
}

std::vector<double> UsageStats::frequencies() const {
  std::vector<double> f(counts.size(), 0.0);
  if (window == 0) return f;
  const double slots = static_cast<double>(k * window);
  for (std::size_t i = 0; i < counts.size(); ++i) f[i] = static_cast<double>(counts[i]) / slots;
  return f;
}

BalancerThresholds BalancerThresholds::defaults_for(std::size_t n_experts) {
  const double r = static_cast<double>(n_experts);
  return {2.0 / r, 4.0 / (5.0 * r), 0.001};
}

void BalancerThresholds::validate(std::size_t n_experts) const {
  const double uniform = 1.0 / static_cast<double>(n_experts);
  if (!(tau2 < uniform && uniform < tau1))
    throw ConfigError("balancer thresholds must satisfy tau2 < 1/r < tau1");
  if (!(gamma >= 0.0)) throw ConfigError("balancer gamma must be non-negative");
}

std::vector<double> update_bias(std::span<const double> u, const UsageStats& stats,
                                const BalancerThresholds& thresholds) {
  if (stats.window == 0) throw UsageError("update_bias: empty usage window");
  if (stats.counts.size() != u.size()) throw ShapeError("update_bias: bias and usage lengths differ");
  const auto f = stats.frequencies();
  std::vector<double> out(u.begin(), u.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (f[i] > thresholds.tau1)
      out[i] -= thresholds.gamma;
    else if (f[i] < thresholds.tau2)
      out[i] += thresholds.gamma;
  }
  return out;
}

SwitchAuxLoss switch_aux_loss(std::span<const std::vector<double>> weights, double alpha, double n_scale) {
  if (weights.empty()) throw UsageError("switch_aux_loss: empty batch");
  const std::size_t r = weights.front().size();
  std::vector<double> argmax_count(r, 0.0);
  std::vector<double> weight_sum(r, 0.0);
  for (const auto& w : weights) {
    if (w.size() != r) throw ShapeError("switch_aux_loss: ragged weight vectors");
    const auto best = static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin());
    argmax_count[best] += 1.0;
    for (std::size_t i = 0; i < r; ++i) weight_sum[i] += w[i];
  }
  const double t = static_cast<double>(weights.size());
  const double scale = alpha * n_scale / (t * t);
  SwitchAuxLoss out;
  out.coeff.resize(r);
  for (std::size_t i = 0; i < r; ++i) {
    out.coeff[i] = scale * argmax_count[i];
    out.value += out.coeff[i] * weight_sum[i];
  }
  return out;
}

}  // namespace moece::moe
