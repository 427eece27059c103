#include "moece/pipeline/model.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <random>

#include "moece/error.hpp"
#include "moece/numerics/binary_io.hpp"

namespace moece::pipeline {

ConfigTuple config_tuple(const channel::ChannelSample& sample) {
  return {sample.n_rb, std::llround(sample.delay_spread_s * 1e9), sample.profile_name};
}

const char* precision_name(Precision p) { return p == Precision::Float32 ? "float32" : "float64"; }

Precision parse_precision(const std::string& s) {
  if (s == "float64") return Precision::Float64;
  if (s == "float32") return Precision::Float32;
  throw ConfigError("unknown precision '" + s + "' (expected float32 or float64)");
}

std::size_t Model::n_experts() const {
  if (const auto* m = std::get_if<moe::MoEModel>(&body)) return m->config.n_experts;
  return 1;
}

std::size_t Model::k() const {
  if (const auto* m = std::get_if<moe::MoEModel>(&body)) return m->config.k;
  return 1;
}

Model::Output Model::forward(Tape& tape, Var x, bool training, moe::ForwardCounters* counters) {
  Output out;
  if (std::holds_alternative<IdentityModel>(body)) {
    out.y = x;
  } else if (auto* s = std::get_if<SingleExpert>(&body)) {
    out.y = models::resnet_forward(tape, s->params, s->spec, x);
    if (counters) {
      ++counters->expert_calls;
      ++counters->routed_inputs;
    }
  } else {
    auto& m = std::get<moe::MoEModel>(body);
    auto r = moe::moe_forward(tape, m, x, training || m.bias_at_eval, counters);
    out.y = r.y;
    out.weights = r.weights;
    out.decision = std::move(r.decision);
  }
  return out;
}

std::vector<ModelParams*> Model::param_groups() {
  std::vector<ModelParams*> groups;
  if (auto* s = std::get_if<SingleExpert>(&body)) groups.push_back(&s->params);
  if (auto* m = std::get_if<moe::MoEModel>(&body)) {
    for (auto& e : m->experts) groups.push_back(&e);
    groups.push_back(&m->router);
  }
  return groups;
}

std::vector<const ModelParams*> Model::param_groups() const {
  std::vector<const ModelParams*> out;
  for (auto* g : const_cast<Model*>(this)->param_groups()) out.push_back(g);
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto* g : param_groups()) n += models::count_parameters(*g);
  return n;
}

Model make_identity(std::string name) {
  Model m;
  m.name = std::move(name);
  m.body = IdentityModel{};
  return m;
}

Model make_single_expert(const models::ResNetSpec& spec, std::uint64_t seed, std::string name) {
  std::mt19937_64 rng(seed);
  Model m;
  m.name = std::move(name);
  m.body = SingleExpert{spec, models::init_resnet(spec, rng)};
  return m;
}

Model make_moe(const moe::MoEConfig& config, std::uint64_t seed, std::string name) {
  std::mt19937_64 rng(seed);
  Model m;
  m.name = std::move(name);
  m.body = moe::MoEModel::init(config, rng);
  return m;
}

namespace {

constexpr std::string_view kMagic{"MOECECK\0", 8};

struct NamedGroup {
  std::string prefix;
  ModelParams* params;
};

std::vector<NamedGroup> named_groups(Model& model) {
  std::vector<NamedGroup> out;
  if (auto* s = std::get_if<SingleExpert>(&model.body)) out.push_back({"backbone.", &s->params});
  if (auto* m = std::get_if<moe::MoEModel>(&model.body)) {
    for (std::size_t e = 0; e < m->experts.size(); ++e)
      out.push_back({"expert." + std::to_string(e) + ".", &m->experts[e]});
    out.push_back({"router.", &m->router});
  }
  return out;
}

const char* kind_of(const Model& m) {
  if (std::holds_alternative<IdentityModel>(m.body)) return "identity";
  if (std::holds_alternative<SingleExpert>(m.body)) return "resnet";
  return "moe";
}

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  numerics::BinaryWriter w;
  w.put_bytes(kMagic);
  w.put(kCheckpointFormatVersion);
  const bool f32 = model.precision == Precision::Float32;
  w.put(std::uint32_t{f32 ? 4u : 8u});
  w.put_string(kind_of(model));
  w.put_string(model.name);

  models::ResNetSpec spec{};
  if (const auto* s = std::get_if<SingleExpert>(&model.body)) spec = s->spec;
  if (const auto* m = std::get_if<moe::MoEModel>(&model.body)) spec = m->config.expert;
  w.put(static_cast<std::uint32_t>(spec.n_blocks));
  w.put(static_cast<std::uint32_t>(spec.channels));
  w.put(static_cast<std::uint32_t>(spec.io_channels));
  if (const auto* m = std::get_if<moe::MoEModel>(&model.body)) {
    w.put(static_cast<std::uint32_t>(m->config.n_experts));
    w.put(static_cast<std::uint32_t>(m->config.k));
    w.put(m->config.thresholds.tau1);
    w.put(m->config.thresholds.tau2);
    w.put(m->config.thresholds.gamma);
    w.put(static_cast<std::uint8_t>(m->bias_at_eval ? 1 : 0));
    for (double u : m->bias) w.put(u);
  }
  w.put(static_cast<std::uint32_t>(model.footprint.size()));
  for (const auto& [n_rb, ns, profile] : model.footprint) {
    w.put(static_cast<std::uint32_t>(n_rb));
    w.put(static_cast<std::int64_t>(ns));
    w.put_string(profile);
  }

  auto groups = named_groups(const_cast<Model&>(model));
  std::uint32_t count = 0;
  for (const auto& g : groups) count += static_cast<std::uint32_t>(g.params->size());
  w.put(count);
  for (const auto& g : groups) {
    for (const auto& [name, t] : *g.params) {
      w.put_string(g.prefix + name);
      w.put(static_cast<std::uint32_t>(t.rank()));
      for (auto e : t.shape()) w.put(static_cast<std::uint32_t>(e));
      for (double v : t.data()) {
        if (f32)
          w.put(static_cast<float>(v));
        else
          w.put(v);
      }
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw IoError("write failed for checkpoint " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::vector<char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  numerics::BinaryReader r(std::move(bytes), "checkpoint " + path.string());
  const std::string where = "checkpoint " + path.string();

  if (r.get_bytes(kMagic.size()) != kMagic) throw ParseError(where + ": bad magic, not a checkpoint");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointFormatVersion)
    throw ParseError(where + ": format version " + std::to_string(version) + " is not supported (expected " +
                     std::to_string(kCheckpointFormatVersion) + ")");
  const auto scalar_bytes = r.get<std::uint32_t>();
  if (scalar_bytes != 4 && scalar_bytes != 8)
    throw ParseError(where + ": invalid scalar width " + std::to_string(scalar_bytes));
  const std::string kind = r.get_string(64);
  const std::string name = r.get_string(4096);

  models::ResNetSpec spec;
  spec.n_blocks = r.get<std::uint32_t>();
  spec.channels = r.get<std::uint32_t>();
  spec.io_channels = r.get<std::uint32_t>();

  Model model;
  try {
    if (kind == "identity") {
      model = make_identity(name);
    } else if (kind == "resnet") {
      model = make_single_expert(spec, 0, name);
    } else if (kind == "moe") {
      moe::MoEConfig cfg;
      cfg.expert = spec;
      cfg.n_experts = r.get<std::uint32_t>();
      cfg.k = r.get<std::uint32_t>();
      if (cfg.n_experts > 4096) throw ParseError(where + ": implausible expert count");
      cfg.thresholds.tau1 = r.get<double>();
      cfg.thresholds.tau2 = r.get<double>();
      cfg.thresholds.gamma = r.get<double>();
      model = make_moe(cfg, 0, name);
      auto& m = std::get<moe::MoEModel>(model.body);
      m.bias_at_eval = r.get<std::uint8_t>() != 0;
      for (auto& u : m.bias) u = r.get<double>();
    } else {
      throw ParseError(where + ": unknown model kind '" + kind + "'");
    }
  } catch (const ConfigError& e) {
    throw ParseError(where + ": invalid stored model spec: " + e.what());
  }
  model.precision = scalar_bytes == 4 ? Precision::Float32 : Precision::Float64;

  const auto fp_count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < fp_count; ++i) {
    const std::size_t n_rb = r.get<std::uint32_t>();
    const long long ns = r.get<std::int64_t>();
    model.footprint.insert({n_rb, ns, r.get_string(4096)});
  }

  auto groups = named_groups(model);
  std::size_t expected = 0;
  for (const auto& g : groups) expected += g.params->size();
  const auto count = r.get<std::uint32_t>();
  if (count != expected)
    throw ParseError(where + ": holds " + std::to_string(count) + " tensors, model spec needs " +
                     std::to_string(expected));
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string tensor_path = r.get_string(4096);
    numerics::Tensor* target = nullptr;
    for (const auto& g : groups) {
      if (tensor_path.rfind(g.prefix, 0) != 0) continue;
      auto it = g.params->find(tensor_path.substr(g.prefix.size()));
      if (it != g.params->end()) target = &it->second;
    }
    if (!target) throw ParseError(where + ": unexpected tensor '" + tensor_path + "'");
    if (!seen.insert(tensor_path).second) throw ParseError(where + ": duplicate tensor '" + tensor_path + "'");
    const auto rank = r.get<std::uint32_t>();
    numerics::Shape shape;
    for (std::uint32_t d = 0; d < rank && d < 8; ++d) shape.push_back(r.get<std::uint32_t>());
    if (shape != target->shape())
      throw ParseError(where + ": tensor '" + tensor_path + "' has shape " + numerics::shape_to_string(shape) +
                       ", model expects " + numerics::shape_to_string(target->shape()));
    for (auto& v : target->data()) v = scalar_bytes == 4 ? static_cast<double>(r.get<float>()) : r.get<double>();
  }
  if (!r.at_end()) throw ParseError(where + ": trailing bytes after last tensor");
  return model;
}

}  // namespace moece::pipeline
