#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "moece/cli/config.hpp"
#include "moece/models/complexity.hpp"

namespace moece::cli {

// Environment variable naming the root under which relative output
// directories are placed when --out is not given.
inline constexpr const char* kOutRootEnv = "MOECE_OUT_ROOT";
inline constexpr int kManifestVersion = 1;

struct RunOptions {
  std::filesystem::path out;
  bool force = false;
  unsigned threads = 1;
  std::ostream* log = nullptr;  // progress lines; null for silence
};

// --out when given, otherwise the config's output_dir placed under
// $MOECE_OUT_ROOT (or the working directory).
std::filesystem::path resolve_output(const ExperimentConfig& config, const std::optional<std::string>& cli_out);

// Artifact layout under the output directory:
//   manifest.json, complexity.csv, summary_test.csv, summary_zeroshot.csv
//   data/{train,test,zeroshot_<name>}.bin, data/datasets.json
//   models/<name>/{checkpoint.bin,history.csv,eval.csv,usage.csv,routing_trace.csv,
//                  zeroshot_<set>_eval.csv,zeroshot_<set>_usage.csv}
//   models/ls/... for the least-squares reference (no checkpoint or history).
void cmd_generate(const ExperimentConfig& config, const RunOptions& opts);
void cmd_train(const ExperimentConfig& config, const RunOptions& opts);
void cmd_eval(const ExperimentConfig& config, const RunOptions& opts);
void cmd_zeroshot(const ExperimentConfig& config, const RunOptions& opts);
// Prints the table to `out`; writes complexity.csv when opts.out is non-empty.
std::vector<models::ComplexityReport> cmd_complexity(const ExperimentConfig& config, const RunOptions& opts,
                                                     std::ostream& out);
// generate + train + eval + zeroshot + complexity + manifest.
void cmd_run(const ExperimentConfig& config, const RunOptions& opts);

// Complexity rows for the config's models plus matched single-expert
// baselines (k * blocks) and the top-1/top-2 MoE variants.
std::vector<models::ComplexityReport> complexity_rows(const ExperimentConfig& config);

std::string manifest_json(const ExperimentConfig& config);

}  // namespace moece::cli
