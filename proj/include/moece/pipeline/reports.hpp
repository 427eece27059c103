#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "moece/models/complexity.hpp"
#include "moece/pipeline/evaluate.hpp"
#include "moece/pipeline/train.hpp"

namespace moece::pipeline {

// CSV writers/readers. Reals are written with %.17g so a reload reproduces
// the exact doubles.
//   eval:       snr_db,profile,n_rb,nmse_linear,nmse_db,samples
//   usage:      snr_db,expert_0,...,expert_{r-1}
//   history:    epoch,train_nmse,val_nmse,max_usage,min_usage
//   trace:      sample_id,snr_db,profile,selected,w   (lists joined by ';')
//   complexity: model,macs,flops,params,model_size_bytes

std::string eval_csv(const std::vector<EvalRow>& rows);
std::string usage_csv(const std::vector<UsageRow>& rows);
std::string history_csv(const std::vector<EpochRecord>& rows);
std::string trace_csv(const std::vector<TraceRow>& rows);
std::string complexity_csv(const std::vector<models::ComplexityReport>& rows);

std::vector<EvalRow> parse_eval_csv(const std::string& text);
std::vector<UsageRow> parse_usage_csv(const std::string& text);
std::vector<EpochRecord> parse_history_csv(const std::string& text);
std::vector<TraceRow> parse_trace_csv(const std::string& text);
std::vector<models::ComplexityReport> parse_complexity_csv(const std::string& text);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace moece::pipeline
