#include "moece/models/params.hpp"

#include <cmath>

#include "moece/error.hpp"

namespace moece::models {

std::size_t count_parameters(const ModelParams& params) {
  std::size_t n = 0;
  for (const auto& [name, t] : params) n += t.size();
  return n;
}

void clear_grads(ModelParams& params) {
  for (auto& [name, t] : params) t.clear_grad();
}

void add_conv(ModelParams& params, const std::string& prefix, std::size_t cin, std::size_t cout,
              std::mt19937_64& rng) {
  const double stddev = std::sqrt(2.0 / (9.0 * static_cast<double>(cin)));
  Tensor kernel = Tensor::randn({3, 3, cin, cout}, rng, stddev);
  kernel.set_requires_grad(true);
  Tensor bias({cout});
  bias.set_requires_grad(true);
  params[prefix + ".kernel"] = std::move(kernel);
  params[prefix + ".bias"] = std::move(bias);
}

Var conv(Tape& tape, ModelParams& params, const std::string& prefix, Var x, std::size_t stride) {
  auto k = params.find(prefix + ".kernel");
  auto b = params.find(prefix + ".bias");
  if (k == params.end() || b == params.end()) throw ShapeError("missing parameters for " + prefix);
  return tape.conv2d(x, tape.parameter(k->second), tape.parameter(b->second), stride);
}

void quantize_to_float(ModelParams& params) {
  for (auto& [name, t] : params)
    for (auto& v : t.data()) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace moece::models
