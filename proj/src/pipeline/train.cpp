#include "moece/pipeline/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <string>

#include "moece/channel/generator.hpp"
#include "moece/error.hpp"
#include "moece/numerics/adam.hpp"
#include "moece/numerics/random.hpp"
#include "moece/pipeline/evaluate.hpp"
#include "moece/pipeline/transforms.hpp"

namespace moece::pipeline {

const char* balancer_name(BalancerKind kind) {
  switch (kind) {
    case BalancerKind::Alflb: return "alflb";
    case BalancerKind::SwitchAux: return "switch_aux";
    case BalancerKind::None: return "none";
  }
  return "?";
}

BalancerKind parse_balancer(const std::string& s) {
  if (s == "alflb") return BalancerKind::Alflb;
  if (s == "switch_aux") return BalancerKind::SwitchAux;
  if (s == "none") return BalancerKind::None;
  throw ConfigError("unknown balancer '" + s + "' (expected alflb, switch_aux or none)");
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw ConfigError("train.validation_fraction must lie in [0, 1)");
  if (balancer == BalancerKind::SwitchAux && !(switch_alpha >= 0.0))
    throw ConfigError("train.switch_alpha must be non-negative");
}

bool is_validation_sample(const channel::ChannelSample& sample, double fraction) {
  constexpr std::uint64_t kBuckets = 1'000'000;
  const auto bucket = numerics::splitmix64(sample.seed ^ 0x5EEDFACEULL) % kBuckets;
  return static_cast<double>(bucket) < fraction * static_cast<double>(kBuckets);
}

namespace {

struct Prepared {
  Tensor x;
  Tensor target;  // clean channel, frequency domain, [n_ant, n_pf, 2]
};

Prepared prepare(const channel::ChannelSample& s) {
  return {preprocess(s).x, channel::to_real_tensor(s.h_clean)};
}

using ParamStates = std::map<const numerics::Tensor*, numerics::AdamState>;

}  // namespace

History train(Model& model, const channel::Dataset& dataset, const TrainConfig& config) {
  config.validate();
  if (!model.trainable()) throw UsageError("train: model '" + model.name + "' has no parameters");
  if (dataset.empty()) throw UsageError("train: empty dataset");
  model.precision = config.precision;

  std::vector<std::size_t> train_idx;
  channel::Dataset val_set;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (is_validation_sample(dataset.samples[i], config.validation_fraction))
      val_set.add(dataset.samples[i]);
    else
      train_idx.push_back(i);
  }
  if (train_idx.empty()) throw UsageError("train: every sample fell into the validation split");

  for (const auto& s : dataset.samples) model.footprint.insert(config_tuple(s));

  const std::size_t io = [&] {
    if (auto* s = std::get_if<SingleExpert>(&model.body)) return s->spec.io_channels;
    return std::get<moe::MoEModel>(model.body).config.expert.io_channels;
  }();
  if (io != 2) throw ConfigError("train: model io_channels must be 2 to match the dataset, got " + std::to_string(io));

  std::vector<Prepared> prepared(dataset.size());
  for (auto i : train_idx) prepared[i] = prepare(dataset.samples[i]);

  auto mean_val = [&] {
    const auto v = per_sample_nmse(model, val_set);
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };

  History history;
  history.initial_val_nmse = val_set.empty() ? std::numeric_limits<double>::quiet_NaN() : mean_val();
  if (config.epochs == 0) return history;

  numerics::AdamConfig adam;
  adam.learning_rate = config.learning_rate;
  ParamStates states;
  const auto groups = model.param_groups();
  if (config.precision == Precision::Float32)
    for (auto* g : groups) models::quantize_to_float(*g);

  auto* moe_model = std::get_if<moe::MoEModel>(&model.body);
  const std::size_t r = model.n_experts();
  const std::size_t k = model.k();

  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order = train_idx;
    std::mt19937_64 shuffle_rng(numerics::derive_seed(config.seed, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    moe::UsageStats epoch_usage(r, k);
    double loss_sum = 0.0;
    std::size_t loss_n = 0;

    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::size_t b = end - start;
      for (auto* g : groups) models::clear_grads(*g);
      moe::UsageStats batch_usage(r, k);
      moe::ForwardCounters counters;
      const Tensor seed({1}, {1.0 / static_cast<double>(b)});

      auto check = [&](double loss, std::size_t sample) {
        if (!std::isfinite(loss))
          throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", sample " +
                                std::to_string(sample));
      };

      if (config.balancer == BalancerKind::SwitchAux && moe_model) {
        // Argmax counts span the whole batch, so keep every tape alive until
        // the auxiliary coefficients are known.
        std::vector<Tape> tapes(b);
        std::vector<Var> losses(b), weights(b);
        std::vector<std::vector<double>> w_batch(b);
        for (std::size_t j = 0; j < b; ++j) {
          const auto& p = prepared[order[start + j]];
          const Var x = tapes[j].constant(p.x);
          const auto out = model.forward(tapes[j], x, true, &counters);
          losses[j] = tapes[j].nmse(to_frequency(tapes[j], out.y), p.target);
          weights[j] = *out.weights;
          w_batch[j] = out.decision->w;
          batch_usage.record(out.decision->selected);
          const double l = tapes[j].value(losses[j])[0];
          check(l, order[start + j]);
          loss_sum += l;
          ++loss_n;
        }
        auto aux = moe::switch_aux_loss(w_batch, config.switch_alpha, static_cast<double>(r));
        for (auto& c : aux.coeff) c *= static_cast<double>(b);
        for (std::size_t j = 0; j < b; ++j) {
          const Var total = tapes[j].add(losses[j], tapes[j].dot_const(weights[j], aux.coeff));
          tapes[j].backward(total, seed);
        }
      } else {
        for (std::size_t j = start; j < end; ++j) {
          const auto& p = prepared[order[j]];
          Tape tape;
          const Var x = tape.constant(p.x);
          const auto out = model.forward(tape, x, true, &counters);
          const Var loss = tape.nmse(to_frequency(tape, out.y), p.target);
          const double l = tape.value(loss)[0];
          check(l, order[j]);
          loss_sum += l;
          ++loss_n;
          if (out.decision)
            batch_usage.record(out.decision->selected);
          else
            batch_usage.record(std::vector<std::size_t>{0});
          tape.backward(loss, seed);
        }
      }

      for (auto* g : groups) {
        for (auto& [name, t] : *g) {
          if (!t.has_grad()) continue;
          numerics::adam_step(t, states[&t], adam);
        }
        if (config.precision == Precision::Float32) models::quantize_to_float(*g);
      }
      if (moe_model && config.balancer == BalancerKind::Alflb)
        moe_model->bias = moe::update_bias(moe_model->bias, batch_usage, moe_model->config.thresholds);

      for (std::size_t e = 0; e < r; ++e) epoch_usage.counts[e] += batch_usage.counts[e];
      epoch_usage.window += batch_usage.window;
      history.degenerate_renormalizations += counters.degenerate;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_nmse = loss_sum / static_cast<double>(loss_n);
    if (val_set.empty()) {
      rec.val_nmse = std::numeric_limits<double>::quiet_NaN();
    } else {
      rec.val_nmse = mean_val();
      if (!std::isfinite(rec.val_nmse))
        throw DivergenceError("non-finite validation NMSE after epoch " + std::to_string(epoch));
    }
    const auto freq = epoch_usage.frequencies();
    rec.max_usage = *std::max_element(freq.begin(), freq.end());
    rec.min_usage = *std::min_element(freq.begin(), freq.end());
    history.final_usage = freq;
    history.epochs.push_back(rec);
    if (config.on_epoch) config.on_epoch(rec);

    if (config.patience > 0 && !val_set.empty()) {
      if (rec.val_nmse < best_val) {
        best_val = rec.val_nmse;
        since_best = 0;
      } else if (++since_best >= config.patience) {
        break;
      }
    }
  }
  return history;
}

}  // namespace moece::pipeline
