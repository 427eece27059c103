#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "moece/channel/dataset.hpp"
#include "moece/models/resnet.hpp"
#include "moece/moe/moe_model.hpp"

namespace moece::pipeline {

using models::ModelParams;
using numerics::Tape;
using numerics::Var;

// Output equals input; the LS baseline.
struct IdentityModel {};

struct SingleExpert {
  models::ResNetSpec spec;
  ModelParams params;
};

// (n_rb, delay spread in whole ns, profile label) seen during training.
using ConfigTuple = std::tuple<std::size_t, long long, std::string>;
ConfigTuple config_tuple(const channel::ChannelSample& sample);

enum class Precision { Float64, Float32 };
const char* precision_name(Precision p);
Precision parse_precision(const std::string& s);

struct Model {
  std::string name;
  std::variant<IdentityModel, SingleExpert, moe::MoEModel> body;
  std::set<ConfigTuple> footprint;
  Precision precision = Precision::Float64;

  bool is_moe() const { return std::holds_alternative<moe::MoEModel>(body); }
  bool trainable() const { return !std::holds_alternative<IdentityModel>(body); }
  std::size_t n_experts() const;
  std::size_t k() const;

  struct Output {
    Var y;
    std::optional<Var> weights;
    std::optional<moe::RoutingDecision> decision;
  };
  // `training` selects whether the selection bias applies: always during
  // training, and during inference only when the MoE's bias_at_eval is set.
  Output forward(Tape& tape, Var x, bool training, moe::ForwardCounters* counters = nullptr);

  std::vector<ModelParams*> param_groups();
  std::vector<const ModelParams*> param_groups() const;
  std::size_t parameter_count() const;
};

Model make_identity(std::string name = "identity");
Model make_single_expert(const models::ResNetSpec& spec, std::uint64_t seed, std::string name = "resnet");
Model make_moe(const moe::MoEConfig& config, std::uint64_t seed, std::string name = "moe");

// Checkpoint container, little-endian:
//   "MOECECK\0", u32 version, u32 scalar bytes (4|8), string kind, string name,
//   u32 n_blocks, u32 channels, u32 io_channels,
//   [moe] u32 r, u32 k, f64 tau1, f64 tau2, f64 gamma, u8 bias_at_eval, f64 x r bias,
//   u32 footprint count, (u32 n_rb, i64 delay ns, string profile) each,
//   u32 tensor count, (string path, u32 rank, u32 extents..., scalars) each.
// Tensor paths are "expert.<e>.<name>", "router.<name>" or "backbone.<name>".
inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace moece::pipeline
