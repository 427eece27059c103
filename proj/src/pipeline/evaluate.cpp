#include "moece/pipeline/evaluate.hpp"

#include <map>

#include "moece/error.hpp"
#include "moece/numerics/parallel.hpp"
#include "moece/pipeline/transforms.hpp"

namespace moece::pipeline {

namespace {

struct SampleResult {
  double nmse = 0.0;
  std::vector<std::size_t> selected;
  std::vector<double> w;
  std::size_t expert_calls = 0;
};

SampleResult run_sample(Model& model, const channel::ChannelSample& sample) {
  const auto pre = preprocess(sample);
  Tape tape;
  moe::ForwardCounters counters;
  const Var x = tape.constant(pre.x);
  const auto out = model.forward(tape, x, /*training=*/false, &counters);
  SampleResult res;
  res.nmse = nmse(sample.h_clean, postprocess(tape.value(out.y), pre.context));
  if (out.decision) {
    res.selected = out.decision->selected;
    res.w = out.decision->w;
  }
  res.expert_calls = counters.expert_calls;
  return res;
}

std::vector<SampleResult> run_all(Model& model, const channel::Dataset& dataset, unsigned threads) {
  std::vector<SampleResult> results(dataset.size());
  numerics::parallel_for(dataset.size(), threads,
                         [&](std::size_t i) { results[i] = run_sample(model, dataset.samples[i]); });
  return results;
}

}  // namespace

std::vector<double> per_sample_nmse(Model& model, const channel::Dataset& dataset, unsigned threads) {
  std::vector<double> out;
  for (const auto& r : run_all(model, dataset, threads)) out.push_back(r.nmse);
  return out;
}

EvalReport evaluate(Model& model, const channel::Dataset& dataset, unsigned threads) {
  if (dataset.empty()) throw UsageError("evaluate: empty dataset");
  const auto results = run_all(model, dataset, threads);

  struct Acc {
    double sum = 0.0;
    std::size_t n = 0;
  };
  std::map<channel::GroupKey, Acc> groups;
  std::map<double, std::vector<std::size_t>> usage_counts;
  std::map<double, std::size_t> usage_inputs;
  const std::size_t r = model.n_experts();

  EvalReport rep;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& s = dataset.samples[i];
    const auto& res = results[i];
    auto& g = groups[{s.snr_db, s.profile_name, s.n_rb}];
    g.sum += res.nmse;
    ++g.n;

    auto& counts = usage_counts[s.snr_db];
    counts.resize(r, 0);
    if (model.is_moe()) {
      for (auto e : res.selected) ++counts[e];
      rep.trace.push_back({i, s.snr_db, s.profile_name, res.selected, res.w});
    } else {
      counts[0] += 1;
    }
    ++usage_inputs[s.snr_db];
    rep.expert_calls += res.expert_calls;
    ++rep.routed_inputs;
  }

  for (const auto& [key, acc] : groups) {
    const double lin = acc.sum / static_cast<double>(acc.n);
    rep.rows.push_back({key.snr_db, key.profile, key.n_rb, lin, nmse_db(lin), acc.n});
  }
  const std::size_t k = model.k();
  for (const auto& [snr, counts] : usage_counts) {
    UsageRow row{snr, {}};
    const double slots = static_cast<double>(k * usage_inputs[snr]);
    for (auto c : counts) row.frequencies.push_back(static_cast<double>(c) / slots);
    rep.usage.push_back(std::move(row));
  }
  return rep;
}

EvalReport zero_shot_eval(Model& model, const channel::Dataset& dataset, unsigned threads) {
  std::set<ConfigTuple> overlap;
  for (const auto& s : dataset.samples) {
    const auto t = config_tuple(s);
    if (model.footprint.count(t)) overlap.insert(t);
  }
  if (!overlap.empty()) {
    const auto& [n_rb, ns, profile] = *overlap.begin();
    throw ConfigError("zero-shot dataset overlaps the training configurations (e.g. n_rb=" +
                      std::to_string(n_rb) + ", delay_spread=" + std::to_string(ns) + "ns, profile=" + profile +
                      ")");
  }
  return evaluate(model, dataset, threads);
}

double mean_nmse_db(const EvalReport& report) {
  if (report.rows.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : report.rows) s += r.nmse_db;
  return s / static_cast<double>(report.rows.size());
}

}  // namespace moece::pipeline
