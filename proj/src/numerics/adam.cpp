#include "moece/numerics/adam.hpp"

#include <cmath>
#include <string>

#include "moece/error.hpp"

namespace moece::numerics {

void adam_step(std::span<double> param, std::span<const double> grad, AdamState& state,
               const AdamConfig& config) {
  if (grad.size() != param.size())
    throw ShapeError("adam_step: gradient length " + std::to_string(grad.size()) +
                     " does not match parameter length " + std::to_string(param.size()));
  if (state.m.empty() && state.v.empty() && state.step == 0) {
    state.m.assign(param.size(), 0.0);
    state.v.assign(param.size(), 0.0);
  }
  if (state.m.size() != param.size() || state.v.size() != param.size())
    throw ShapeError("adam_step: moment buffers do not match the parameter");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    param[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

void adam_step(Tensor& param, AdamState& state, const AdamConfig& config) {
  if (!param.has_grad()) {
    const std::vector<double> zeros(param.size(), 0.0);
    adam_step(param.data(), zeros, state, config);
    return;
  }
  const std::vector<double> g(param.grad().begin(), param.grad().end());
  adam_step(param.data(), g, state, config);
}

}  // namespace moece::numerics
