#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "moece/models/resnet.hpp"

namespace moece::models {

// MACs/FLOPs/parameter bookkeeping for 3x3 same-padded convolutions.
//
//   MACs(conv)   = H_out * W_out * 9 * Cin * Cout
//   params(conv) = 9 * Cin * Cout + Cout
//   FLOPs        = 2 * MACs
//
// Elementwise work (relu, residual add, pooling, softmax) is not counted.

struct ConvGeometry {
  std::size_t in_h = 0;
  std::size_t in_w = 0;
  std::size_t cin = 0;
  std::size_t cout = 0;
  std::size_t stride = 1;

  std::size_t out_h() const { return (in_h + stride - 1) / stride; }
  std::size_t out_w() const { return (in_w + stride - 1) / stride; }
  std::uint64_t macs() const;
  std::uint64_t params() const;
};

struct ComplexityReport {
  std::string model;
  std::uint64_t macs = 0;
  std::uint64_t flops = 0;
  std::uint64_t params = 0;
  std::uint64_t model_size_bytes = 0;
};

inline constexpr std::size_t kBytesPerScalar = 4;

std::vector<ConvGeometry> resnet_layers(const ResNetSpec& spec, std::size_t h, std::size_t w);
std::vector<ConvGeometry> router_layers(const RouterSpec& spec, std::size_t h, std::size_t w);

ComplexityReport count_layers(std::string name, const std::vector<ConvGeometry>& layers);
ComplexityReport count_resnet(const ResNetSpec& spec, std::size_t h, std::size_t w);
ComplexityReport count_router(const RouterSpec& spec, std::size_t h, std::size_t w);
// Router plus k expert evaluations; parameters cover all r experts.
ComplexityReport count_moe(const ResNetSpec& expert, const RouterSpec& router, std::size_t k, std::size_t h,
                           std::size_t w);

}  // namespace moece::models
