#include "moece/moe/moe_model.hpp"

#include <string>

#include "moece/error.hpp"

namespace moece::moe {

void MoEConfig::validate() const {
  expert.validate();
  router_spec().validate();
  if (k < 1 || k > n_experts)
    throw ConfigError("moe: k=" + std::to_string(k) + " must be in [1, r=" + std::to_string(n_experts) + "]");
  thresholds.validate(n_experts);
}

MoEModel MoEModel::init(const MoEConfig& config, std::mt19937_64& rng) {
  config.validate();
  MoEModel m;
  m.config = config;
  for (std::size_t e = 0; e < config.n_experts; ++e) m.experts.push_back(models::init_resnet(config.expert, rng));
  m.router = models::init_router(config.router_spec(), rng);
  m.bias.assign(config.n_experts, 0.0);
  return m;
}

MoEOutput moe_forward(Tape& tape, MoEModel& model, Var x, bool apply_bias, ForwardCounters* counters) {
  const auto& cfg = model.config;
  if (model.experts.size() != cfg.n_experts || model.bias.size() != cfg.n_experts)
    throw ConfigError("moe_forward: model holds " + std::to_string(model.experts.size()) + " experts and " +
                      std::to_string(model.bias.size()) + " bias entries, expected " +
                      std::to_string(cfg.n_experts));
  MoEOutput out;
  out.weights = models::router_forward(tape, model.router, cfg.router_spec(), x);
  const auto w = tape.value(out.weights).data();
  const std::vector<double> zeros(cfg.n_experts, 0.0);
  out.decision = select_topk(w, apply_bias ? std::span<const double>(model.bias) : zeros, cfg.k);

  std::vector<Var> candidates;
  candidates.reserve(cfg.k);
  for (auto e : out.decision.selected) {
    candidates.push_back(models::resnet_forward(tape, model.experts[e], cfg.expert, x));
    if (counters) ++counters->expert_calls;
  }
  const Var w_prime = tape.gather_normalized(out.weights, out.decision.selected);
  out.y = tape.weighted_sum(candidates, w_prime);
  if (counters) {
    ++counters->routed_inputs;
    if (out.decision.degenerate) ++counters->degenerate;
  }
  return out;
}

}  // namespace moece::moe
