#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "moece/numerics/tensor.hpp"

namespace moece::numerics {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moment buffers for one parameter tensor. `step` counts the updates this
// parameter has received.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

// One bias-corrected Adam update of `param` in place.
void adam_step(std::span<double> param, std::span<const double> grad, AdamState& state,
               const AdamConfig& config);

void adam_step(Tensor& param, AdamState& state, const AdamConfig& config);

}  // namespace moece::numerics
