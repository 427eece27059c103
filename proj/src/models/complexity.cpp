#include "moece/models/complexity.hpp"

#include "moece/error.hpp"

namespace moece::models {

std::uint64_t ConvGeometry::macs() const {
  return static_cast<std::uint64_t>(out_h()) * out_w() * 9 * cin * cout;
}

std::uint64_t ConvGeometry::params() const { return static_cast<std::uint64_t>(9) * cin * cout + cout; }

std::vector<ConvGeometry> resnet_layers(const ResNetSpec& spec, std::size_t h, std::size_t w) {
  spec.validate();
  std::vector<ConvGeometry> layers;
  layers.push_back({h, w, spec.io_channels, spec.channels, 1});
  for (std::size_t b = 0; b < 2 * spec.n_blocks; ++b) layers.push_back({h, w, spec.channels, spec.channels, 1});
  layers.push_back({h, w, spec.channels, spec.io_channels, 1});
  return layers;
}

std::vector<ConvGeometry> router_layers(const RouterSpec& spec, std::size_t h, std::size_t w) {
  spec.validate();
  const std::size_t r = spec.n_experts;
  std::vector<ConvGeometry> layers;
  layers.push_back({h, w, spec.io_channels, r, RouterSpec::kFirstStride});
  const std::size_t h2 = layers.back().out_h(), w2 = layers.back().out_w();
  layers.push_back({h2, w2, r, 2 * r, 1});
  layers.push_back({h2, w2, 2 * r, r, 1});
  return layers;
}

ComplexityReport count_layers(std::string name, const std::vector<ConvGeometry>& layers) {
  ComplexityReport rep;
  rep.model = std::move(name);
  for (const auto& l : layers) {
    rep.macs += l.macs();
    rep.params += l.params();
  }
  rep.flops = 2 * rep.macs;
  rep.model_size_bytes = rep.params * kBytesPerScalar;
  return rep;
}

ComplexityReport count_resnet(const ResNetSpec& spec, std::size_t h, std::size_t w) {
  return count_layers("resnet-" + std::to_string(spec.n_blocks) + "b", resnet_layers(spec, h, w));
}

ComplexityReport count_router(const RouterSpec& spec, std::size_t h, std::size_t w) {
  return count_layers("router-r" + std::to_string(spec.n_experts), router_layers(spec, h, w));
}

ComplexityReport count_moe(const ResNetSpec& expert, const RouterSpec& router, std::size_t k, std::size_t h,
                           std::size_t w) {
  if (k < 1 || k > router.n_experts) throw ConfigError("count_moe: k must be in [1, r]");
  const auto e = count_resnet(expert, h, w);
  const auto r = count_router(router, h, w);
  ComplexityReport rep;
  rep.model = "moe-top" + std::to_string(k) + "/" + std::to_string(router.n_experts);
  rep.macs = r.macs + k * e.macs;
  rep.flops = 2 * rep.macs;
  rep.params = r.params + router.n_experts * e.params;
  rep.model_size_bytes = rep.params * kBytesPerScalar;
  return rep;
}

}  // namespace moece::models
