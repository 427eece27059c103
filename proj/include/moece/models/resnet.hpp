#pragma once

#include <cstddef>
#include <random>

#include "moece/models/params.hpp"

namespace moece::models {

// Expert backbone: stem conv (io -> channels), n_blocks residual blocks
// (conv-relu-conv, identity skip, relu after the add) and a head conv
// (channels -> io). Every conv is 3x3, stride 1, same-padded, so the network
// accepts any spatial extent.
struct ResNetSpec {
  std::size_t n_blocks = 4;
  std::size_t channels = 16;
  std::size_t io_channels = 2;

  void validate() const;
  bool operator==(const ResNetSpec&) const = default;
};

ModelParams init_resnet(const ResNetSpec& spec, std::mt19937_64& rng);

Var resnet_forward(Tape& tape, ModelParams& params, const ResNetSpec& spec, Var x);

// Router: conv(io->r, stride 2) -> relu -> conv(r->2r) -> relu ->
// conv(2r->r) -> global average pool -> softmax. The first conv halves both
// spatial extents, which keeps the router's cost a small fraction of one
// expert's.
struct RouterSpec {
  std::size_t n_experts = 4;
  std::size_t io_channels = 2;
  static constexpr std::size_t kFirstStride = 2;

  void validate() const;
  bool operator==(const RouterSpec&) const = default;
};

ModelParams init_router(const RouterSpec& spec, std::mt19937_64& rng);

// Returns the softmax weight vector [r].
Var router_forward(Tape& tape, ModelParams& params, const RouterSpec& spec, Var x);

}  // namespace moece::models
