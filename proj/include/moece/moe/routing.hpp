#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace moece::moe {

struct RoutingDecision {
  std::vector<double> w;            // router softmax output
  std::vector<double> w_biased;     // w + u, used only for selection
  std::vector<std::size_t> selected;  // top-k of w_biased, best first
  std::vector<double> w_prime;      // w over `selected`, renormalized
  bool degenerate = false;          // selected raw mass was zero
};

// Top-k of (w + u) with ties going to the lower index. The returned weights
// renormalize the unbiased w over the selection; if that mass is zero the
// weights fall back to 1/k and `degenerate` is set.
RoutingDecision select_topk(std::span<const double> w, std::span<const double> u, std::size_t k);

// Selection counts over a window of routed inputs.
struct UsageStats {
  std::vector<std::size_t> counts;
  std::size_t window = 0;  // routed inputs
  std::size_t k = 1;

  UsageStats() = default;
  UsageStats(std::size_t n_experts, std::size_t k) : counts(n_experts, 0), k(k) {}

  void record(std::span<const std::size_t> selected);
  // count_i / (k * window): the share of selection slots; uniform use gives 1/r.
  std::vector<double> frequencies() const;
};

struct BalancerThresholds {
  double tau1 = 0.5;     // over-utilized above this frequency
  double tau2 = 0.2;     // under-utilized below this frequency
  double gamma = 0.001;  // bias step

  // tau1 = 2/r, tau2 = 4/(5r), gamma = 0.001.
  static BalancerThresholds defaults_for(std::size_t n_experts);
  void validate(std::size_t n_experts) const;
};

// Auxiliary-loss-free balancing step: u_i -= gamma when f_i > tau1,
// u_i += gamma when f_i < tau2.
std::vector<double> update_bias(std::span<const double> u, const UsageStats& stats,
                                const BalancerThresholds& thresholds);

// Switch-style load loss over a batch of router weight vectors:
//   sum_i (alpha * n_scale / T^2) * #{x : argmax w(x) = i} * sum_x w_i(x)
// with T the batch size. The argmax counts are treated as constants, so the
// gradient w.r.t. w_i(x) is coeff[i] for every x in the batch.
struct SwitchAuxLoss {
  double value = 0.0;
  std::vector<double> coeff;
};

SwitchAuxLoss switch_aux_loss(std::span<const std::vector<double>> weights, double alpha, double n_scale);

}  // namespace moece::moe
