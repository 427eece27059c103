#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "moece/channel/dataset.hpp"
#include "moece/pipeline/model.hpp"

namespace moece::pipeline {

enum class BalancerKind { Alflb, SwitchAux, None };
const char* balancer_name(BalancerKind kind);
BalancerKind parse_balancer(const std::string& s);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_nmse = 0.0;
  double val_nmse = 0.0;
  double max_usage = 0.0;  // expert selection frequencies over the epoch
  double min_usage = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  BalancerKind balancer = BalancerKind::Alflb;
  double switch_alpha = 0.01;
  Precision precision = Precision::Float64;
  // Stop after this many epochs without a validation improvement; 0 = off.
  std::size_t patience = 0;
  // Share of samples held out for per-epoch validation; 0 trains on all.
  double validation_fraction = 0.1;
  // Called after every epoch; optional.
  std::function<void(const EpochRecord&)> on_epoch;

  void validate() const;
};

struct History {
  // Validation NMSE of the untrained model; NaN without a validation split.
  double initial_val_nmse = 0.0;
  std::vector<EpochRecord> epochs;
  std::vector<double> final_usage;  // per-expert frequencies in the last epoch
  std::size_t degenerate_renormalizations = 0;
};

// Train/validation split keyed on a hash of the sample seed, so membership
// does not depend on dataset order.
bool is_validation_sample(const channel::ChannelSample& sample, double fraction);

// Mini-batch Adam on the mean frequency-domain NMSE. Per batch: forward every
// sample through its own tape (router, biased top-k, selected experts),
// back-propagate, step the parameters that received gradient (router and the
// selected experts only), then apply the bias update when the balancer is
// ALFLB. Throws DivergenceError when the loss stops being finite.
History train(Model& model, const channel::Dataset& dataset, const TrainConfig& config);

}  // namespace moece::pipeline
