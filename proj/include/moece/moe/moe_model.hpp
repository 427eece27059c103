#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "moece/models/resnet.hpp"
#include "moece/moe/routing.hpp"

namespace moece::moe {

using models::ModelParams;
using numerics::Tape;
using numerics::Var;

struct MoEConfig {
  models::ResNetSpec expert;
  std::size_t n_experts = 4;
  std::size_t k = 1;
  BalancerThresholds thresholds = BalancerThresholds::defaults_for(4);

  models::RouterSpec router_spec() const { return {n_experts, expert.io_channels}; }
  void validate() const;
};

// r experts sharing one backbone spec, a CNN router and the selection bias u.
// u starts at zero and only changes through update_bias; it never appears on
// a tape.
struct MoEModel {
  MoEConfig config;
  std::vector<ModelParams> experts;
  ModelParams router;
  std::vector<double> bias;
  // Whether inference-time routing adds u before the top-k.
  bool bias_at_eval = true;

  static MoEModel init(const MoEConfig& config, std::mt19937_64& rng);
};

struct ForwardCounters {
  std::size_t expert_calls = 0;
  std::size_t routed_inputs = 0;
  std::size_t degenerate = 0;
};

struct MoEOutput {
  Var y;
  Var weights;  // router softmax output on the tape
  RoutingDecision decision;
};

// Router -> biased top-k -> evaluate only the selected experts -> combine
// with the renormalized unbiased weights. Gradients reach the router through
// the renormalized weights.
MoEOutput moe_forward(Tape& tape, MoEModel& model, Var x, bool apply_bias = true,
                      ForwardCounters* counters = nullptr);

}  // namespace moece::moe
