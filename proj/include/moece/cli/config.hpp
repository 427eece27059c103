#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "moece/channel/dataset.hpp"
#include "moece/models/resnet.hpp"
#include "moece/moe/routing.hpp"
#include "moece/pipeline/train.hpp"

namespace moece::cli {

// One dataset definition: the cartesian product of profiles, delay spreads,
// SNRs and RB counts, with samples_per_config draws each.
struct GridConfig {
  std::string name;
  std::vector<std::string> profiles;
  std::vector<double> delay_spread_ns;  // empty: each profile's nominal spread
  std::vector<double> snr_db;
  std::vector<std::size_t> n_rb;
  std::size_t samples_per_config = 0;

  std::vector<channel::ProfileSpec> profile_specs() const;
  std::vector<channel::LinkConfig> links(std::size_t n_ant) const;
  std::size_t sample_count() const;
};

enum class ModelKind { Resnet, Moe };

struct ModelConfig {
  std::string name;
  ModelKind kind = ModelKind::Resnet;
  models::ResNetSpec backbone{2, 8, 2};
  std::size_t r = 4;
  std::size_t k = 1;
  pipeline::BalancerKind balancer = pipeline::BalancerKind::Alflb;
  moe::BalancerThresholds thresholds = moe::BalancerThresholds::defaults_for(4);
  bool bias_at_eval = true;
};

struct ExperimentConfig {
  std::string experiment = "custom";  // mixed_snr | mixed_profile | varying_rb | custom
  std::uint64_t seed = 0;
  std::string output_dir;
  std::size_t n_ant = 4;
  GridConfig train_data;
  GridConfig test_data;
  std::vector<GridConfig> zeroshot;
  std::vector<ModelConfig> models;
  pipeline::TrainConfig train;  // seed and balancer are filled per model
  std::optional<std::size_t> complexity_n_rb;  // geometry for the complexity table

  nlohmann::json to_json() const;
};

// Parses and validates. Errors are ConfigError with the offending field path,
// e.g. "model.k: must not exceed model.r (4), got 5". A document with a
// top-level "config" object (a run manifest) is accepted as well.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

// Seeds derived from the master seed; stable across releases.
std::uint64_t train_data_seed(std::uint64_t master);
std::uint64_t test_data_seed(std::uint64_t master);
std::uint64_t zeroshot_data_seed(std::uint64_t master, std::size_t index);
std::uint64_t model_init_seed(std::uint64_t master, std::size_t index);
std::uint64_t model_train_seed(std::uint64_t master, std::size_t index);

}  // namespace moece::cli
