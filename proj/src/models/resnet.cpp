#include "moece/models/resnet.hpp"

#include <string>

#include "moece/error.hpp"

namespace moece::models {

void ResNetSpec::validate() const {
  if (n_blocks < 1) throw ConfigError("resnet: n_blocks must be >= 1");
  if (channels < 1) throw ConfigError("resnet: channels must be >= 1");
  if (io_channels < 1) throw ConfigError("resnet: io_channels must be >= 1");
}

ModelParams init_resnet(const ResNetSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  ModelParams p;
  add_conv(p, "stem", spec.io_channels, spec.channels, rng);
  for (std::size_t b = 0; b < spec.n_blocks; ++b)
    for (int c = 0; c < 2; ++c)
      add_conv(p, "block." + std::to_string(b) + ".conv." + std::to_string(c), spec.channels, spec.channels,
               rng);
  add_conv(p, "head", spec.channels, spec.io_channels, rng);
  return p;
}

Var resnet_forward(Tape& tape, ModelParams& params, const ResNetSpec& spec, Var x) {
  const auto& in = tape.value(x);
  if (in.rank() != 3 || in.extent(2) != spec.io_channels)
    throw ShapeError("resnet input must be [H,W," + std::to_string(spec.io_channels) + "], got " +
                     numerics::shape_to_string(in.shape()));
  Var h = conv(tape, params, "stem", x);
  for (std::size_t b = 0; b < spec.n_blocks; ++b) {
    const std::string base = "block." + std::to_string(b) + ".conv.";
    Var t = tape.relu(conv(tape, params, base + "0", h));
    t = conv(tape, params, base + "1", t);
    h = tape.relu(tape.add(t, h));
  }
  return conv(tape, params, "head", h);
}

void RouterSpec::validate() const {
  if (n_experts < 2) throw ConfigError("router: n_experts must be >= 2");
  if (io_channels < 1) throw ConfigError("router: io_channels must be >= 1");
}

ModelParams init_router(const RouterSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  const std::size_t r = spec.n_experts;
  ModelParams p;
  add_conv(p, "conv.0", spec.io_channels, r, rng);
  add_conv(p, "conv.1", r, 2 * r, rng);
  add_conv(p, "conv.2", 2 * r, r, rng);
  return p;
}

Var router_forward(Tape& tape, ModelParams& params, const RouterSpec& spec, Var x) {
  const auto& in = tape.value(x);
  if (in.rank() != 3 || in.extent(2) != spec.io_channels)
    throw ShapeError("router input must be [H,W," + std::to_string(spec.io_channels) + "], got " +
                     numerics::shape_to_string(in.shape()));
  Var h = tape.relu(conv(tape, params, "conv.0", x, RouterSpec::kFirstStride));
  h = tape.relu(conv(tape, params, "conv.1", h));
  h = conv(tape, params, "conv.2", h);
  return tape.softmax(tape.global_avg_pool(h));
}

}  // namespace moece::models
