#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "moece/channel/dataset.hpp"
#include "moece/pipeline/model.hpp"

namespace moece::pipeline {

struct EvalRow {
  double snr_db = 0.0;
  std::string profile;
  std::size_t n_rb = 0;
  double nmse_linear = 0.0;
  double nmse_db = 0.0;
  std::size_t samples = 0;

  bool operator==(const EvalRow&) const = default;
};

struct UsageRow {
  double snr_db = 0.0;
  std::vector<double> frequencies;  // one per expert, sums to 1

  bool operator==(const UsageRow&) const = default;
};

struct TraceRow {
  std::size_t sample_id = 0;
  double snr_db = 0.0;
  std::string profile;
  std::vector<std::size_t> selected;
  std::vector<double> w;

  bool operator==(const TraceRow&) const = default;
};

struct EvalReport {
  std::vector<EvalRow> rows;     // sorted by (snr, profile, n_rb)
  std::vector<UsageRow> usage;   // sorted by snr
  std::vector<TraceRow> trace;   // dataset order; empty for non-MoE models
  std::size_t expert_calls = 0;
  std::size_t routed_inputs = 0;
};

// Per-sample frequency-domain NMSE of the model's estimate, in dataset order.
// Read-only over the model; `threads` splits samples across workers.
std::vector<double> per_sample_nmse(Model& model, const channel::Dataset& dataset, unsigned threads = 1);

// Grouped NMSE and per-SNR expert usage. Leaves parameters and bias untouched.
EvalReport evaluate(Model& model, const channel::Dataset& dataset, unsigned threads = 1);

// evaluate() after checking that none of the dataset's (n_rb, delay spread,
// profile) tuples appear in the model's training footprint.
EvalReport zero_shot_eval(Model& model, const channel::Dataset& dataset, unsigned threads = 1);

// Mean over rows of nmse_db (each row one SNR/profile/RB group).
double mean_nmse_db(const EvalReport& report);

}  // namespace moece::pipeline
