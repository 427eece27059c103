#include "moece/cli/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "moece/error.hpp"
#include "moece/numerics/random.hpp"

namespace moece::cli {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) { throw ConfigError(path + ": " + msg); }

// Walks one JSON object, remembering which keys were consumed so unknown
// (usually misspelled) keys can be reported.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  Section child(const std::string& key) { return Section(require(key), at(key)); }

  std::string str(const std::string& key, std::optional<std::string> fallback = {}) {
    if (!has(key)) return fallback ? *fallback : missing(key);
    const auto& v = raw(key);
    if (!v.is_string()) fail(at(key), "expected a string");
    return v.get<std::string>();
  }

  double real(const std::string& key, std::optional<double> fallback = {}) {
    if (!has(key)) {
      if (fallback) return *fallback;
      missing(key);
    }
    const auto& v = raw(key);
    if (!v.is_number()) fail(at(key), "expected a number");
    return v.get<double>();
  }

  std::uint64_t count(const std::string& key, std::optional<std::uint64_t> fallback = {}) {
    if (!has(key)) {
      if (fallback) return *fallback;
      missing(key);
    }
    const auto& v = raw(key);
    if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0 && !v.is_number_unsigned()))
      fail(at(key), "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  bool flag(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = raw(key);
    if (!v.is_boolean()) fail(at(key), "expected true or false");
    return v.get<bool>();
  }

  std::vector<double> reals(const std::string& key, bool optional = false) {
    std::vector<double> out;
    if (!has(key)) {
      if (optional) return out;
      missing(key);
    }
    const auto& v = raw(key);
    if (!v.is_array()) fail(at(key), "expected an array of numbers");
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) fail(at(key) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  std::vector<std::size_t> counts(const std::string& key) {
    std::vector<std::size_t> out;
    const auto& v = require(key);
    if (!v.is_array()) fail(at(key), "expected an array of integers");
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_unsigned()) fail(at(key) + "[" + std::to_string(i) + "]", "expected a non-negative integer");
      out.push_back(v[i].get<std::size_t>());
    }
    return out;
  }

  std::vector<std::string> strings(const std::string& key) {
    std::vector<std::string> out;
    const auto& v = require(key);
    if (!v.is_array()) fail(at(key), "expected an array of strings");
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_string()) fail(at(key) + "[" + std::to_string(i) + "]", "expected a string");
      out.push_back(v[i].get<std::string>());
    }
    return out;
  }

  // Call once every expected key has been read.
  void finish() const {
    for (const auto& [key, _] : j_.items())
      if (!used_.count(key)) fail(at(key), "unknown field");
  }

 private:
  const json& require(const std::string& key) {
    if (!has(key)) missing(key);
    return raw(key);
  }
  [[noreturn]] std::string missing(const std::string& key) const { fail(at(key), "required field is missing"); }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

GridConfig parse_grid(Section s, const std::string& name) {
  GridConfig g;
  g.name = s.str("name", name);
  g.profiles = s.strings("profiles");
  if (g.profiles.empty()) fail(s.at("profiles"), "must not be empty");
  const auto known = channel::builtin_profile_names();
  for (std::size_t i = 0; i < g.profiles.size(); ++i)
    if (std::find(known.begin(), known.end(), g.profiles[i]) == known.end())
      fail(s.at("profiles") + "[" + std::to_string(i) + "]", "unknown profile '" + g.profiles[i] + "'");
  g.delay_spread_ns = s.reals("delay_spread_ns", true);
  for (std::size_t i = 0; i < g.delay_spread_ns.size(); ++i)
    if (!(g.delay_spread_ns[i] > 0.0 && std::isfinite(g.delay_spread_ns[i])))
      fail(s.at("delay_spread_ns") + "[" + std::to_string(i) + "]", "must be positive");
  g.snr_db = s.reals("snr_db");
  if (g.snr_db.empty()) fail(s.at("snr_db"), "must not be empty");
  for (std::size_t i = 0; i < g.snr_db.size(); ++i)
    if (!std::isfinite(g.snr_db[i])) fail(s.at("snr_db") + "[" + std::to_string(i) + "]", "must be finite");
  g.n_rb = s.counts("n_rb");
  if (g.n_rb.empty()) fail(s.at("n_rb"), "must not be empty");
  for (std::size_t i = 0; i < g.n_rb.size(); ++i)
    if (g.n_rb[i] == 0) fail(s.at("n_rb") + "[" + std::to_string(i) + "]", "must be positive");
  g.samples_per_config = s.count("samples_per_config");
  if (g.samples_per_config == 0) fail(s.at("samples_per_config"), "must be positive");
  s.finish();
  return g;
}

json grid_json(const GridConfig& g) {
  json j;
  j["name"] = g.name;
  j["profiles"] = g.profiles;
  j["delay_spread_ns"] = g.delay_spread_ns;
  j["snr_db"] = g.snr_db;
  j["n_rb"] = g.n_rb;
  j["samples_per_config"] = g.samples_per_config;
  return j;
}

ModelConfig parse_model(Section s, std::size_t index) {
  ModelConfig m;
  const std::string type = s.str("type");
  if (type == "resnet")
    m.kind = ModelKind::Resnet;
  else if (type == "moe")
    m.kind = ModelKind::Moe;
  else
    fail(s.at("type"), "expected 'resnet' or 'moe', got '" + type + "'");
  m.name = s.str("name", type + "_" + std::to_string(index));
  if (m.name.empty() || m.name.find_first_of("/\\ ,") != std::string::npos || m.name == "ls")
    fail(s.at("name"), "must be non-empty, not 'ls', and free of '/', '\\', ',' and spaces");
  m.backbone.n_blocks = s.count("blocks", 2);
  m.backbone.channels = s.count("channels", 8);
  if (m.backbone.n_blocks == 0) fail(s.at("blocks"), "must be positive");
  if (m.backbone.channels == 0) fail(s.at("channels"), "must be positive");
  if (m.kind == ModelKind::Moe) {
    m.r = s.count("r", 4);
    if (m.r == 0) fail(s.at("r"), "must be positive");
    m.k = s.count("k", 1);
    if (m.k == 0) fail(s.at("k"), "must be positive");
    if (m.k > m.r) fail(s.at("k"), "must not exceed " + s.at("r") + " (" + std::to_string(m.r) + "), got " +
                                        std::to_string(m.k));
    m.balancer = pipeline::BalancerKind::Alflb;
    if (s.has("balancer")) {
      try {
        m.balancer = pipeline::parse_balancer(s.str("balancer"));
      } catch (const ConfigError& e) {
        fail(s.at("balancer"), e.what());
      }
    }
    const auto d = moe::BalancerThresholds::defaults_for(m.r);
    m.thresholds.tau1 = s.real("tau1", d.tau1);
    m.thresholds.tau2 = s.real("tau2", d.tau2);
    m.thresholds.gamma = s.real("gamma", d.gamma);
    const double uniform = 1.0 / static_cast<double>(m.r);
    if (!(m.thresholds.tau1 > uniform)) fail(s.at("tau1"), "must exceed 1/r");
    if (!(m.thresholds.tau2 < uniform)) fail(s.at("tau2"), "must be below 1/r");
    if (!(m.thresholds.gamma >= 0.0)) fail(s.at("gamma"), "must be non-negative");
    m.bias_at_eval = s.flag("bias_at_eval", true);
  }
  s.finish();
  return m;
}

json model_json(const ModelConfig& m) {
  json j;
  j["name"] = m.name;
  j["type"] = m.kind == ModelKind::Moe ? "moe" : "resnet";
  j["blocks"] = m.backbone.n_blocks;
  j["channels"] = m.backbone.channels;
  if (m.kind == ModelKind::Moe) {
    j["r"] = m.r;
    j["k"] = m.k;
    j["balancer"] = pipeline::balancer_name(m.balancer);
    j["tau1"] = m.thresholds.tau1;
    j["tau2"] = m.thresholds.tau2;
    j["gamma"] = m.thresholds.gamma;
    j["bias_at_eval"] = m.bias_at_eval;
  }
  return j;
}

}  // namespace

std::vector<channel::ProfileSpec> GridConfig::profile_specs() const {
  std::vector<channel::ProfileSpec> out;
  for (const auto& name : profiles) {
    const auto base = channel::builtin_profile(name);
    if (delay_spread_ns.empty()) {
      out.push_back(base);
      continue;
    }
    for (double ns : delay_spread_ns) out.push_back(base.scaled_to(ns * 1e-9));
  }
  return out;
}

std::vector<channel::LinkConfig> GridConfig::links(std::size_t n_ant) const {
  std::vector<channel::LinkConfig> out;
  for (auto rb : n_rb)
    for (double snr : snr_db) {
      channel::LinkConfig l;
      l.n_ant = n_ant;
      l.n_rb = rb;
      l.snr_db = snr;
      out.push_back(l);
    }
  return out;
}

std::size_t GridConfig::sample_count() const {
  const std::size_t spreads = delay_spread_ns.empty() ? 1 : delay_spread_ns.size();
  return profiles.size() * spreads * snr_db.size() * n_rb.size() * samples_per_config;
}

ExperimentConfig parse_config(const json& doc) {
  if (doc.is_object() && doc.contains("config") && doc.contains("format")) return parse_config(doc.at("config"));
  Section root(doc, "");
  ExperimentConfig c;
  c.experiment = root.str("experiment", std::string("custom"));
  if (c.experiment != "mixed_snr" && c.experiment != "mixed_profile" && c.experiment != "varying_rb" &&
      c.experiment != "custom")
    fail("experiment", "expected mixed_snr, mixed_profile, varying_rb or custom, got '" + c.experiment + "'");
  c.seed = root.count("seed", 0);
  c.output_dir = root.str("output_dir", std::string(""));

  {
    Section data = root.child("data");
    c.n_ant = data.count("n_ant", 4);
    if (c.n_ant == 0) fail(data.at("n_ant"), "must be positive");
    c.train_data = parse_grid(data.child("train"), "train");
    c.test_data = parse_grid(data.child("test"), "test");
    if (data.has("zeroshot")) {
      const auto& zs = data.raw("zeroshot");
      if (!zs.is_array()) fail(data.at("zeroshot"), "expected an array of dataset objects");
      std::set<std::string> names;
      for (std::size_t i = 0; i < zs.size(); ++i) {
        const std::string path = data.at("zeroshot") + "[" + std::to_string(i) + "]";
        auto g = parse_grid(Section(zs[i], path), "zeroshot_" + std::to_string(i));
        if (!names.insert(g.name).second) fail(path + ".name", "duplicate name '" + g.name + "'");
        c.zeroshot.push_back(std::move(g));
      }
    }
    data.finish();
  }

  if (root.has("model") == root.has("models")) fail("model", "give exactly one of 'model' or 'models'");
  if (root.has("model")) {
    c.models.push_back(parse_model(root.child("model"), 0));
  } else {
    const auto& arr = root.raw("models");
    if (!arr.is_array() || arr.empty()) fail("models", "expected a non-empty array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string path = "models[" + std::to_string(i) + "]";
      auto m = parse_model(Section(arr[i], path), i);
      if (!names.insert(m.name).second) fail(path + ".name", "duplicate model name '" + m.name + "'");
      c.models.push_back(std::move(m));
    }
  }

  if (root.has("train")) {
    Section t = root.child("train");
    c.train.epochs = t.count("epochs", c.train.epochs);
    c.train.batch_size = t.count("batch_size", c.train.batch_size);
    if (c.train.batch_size == 0) fail(t.at("batch_size"), "must be positive");
    c.train.learning_rate = t.real("learning_rate", c.train.learning_rate);
    if (!(c.train.learning_rate > 0.0)) fail(t.at("learning_rate"), "must be positive");
    c.train.switch_alpha = t.real("switch_alpha", c.train.switch_alpha);
    if (!(c.train.switch_alpha >= 0.0)) fail(t.at("switch_alpha"), "must be non-negative");
    c.train.patience = t.count("patience", 0);
    c.train.validation_fraction = t.real("validation_fraction", c.train.validation_fraction);
    if (!(c.train.validation_fraction >= 0.0 && c.train.validation_fraction < 1.0))
      fail(t.at("validation_fraction"), "must lie in [0, 1)");
    if (t.has("precision")) {
      try {
        c.train.precision = pipeline::parse_precision(t.str("precision"));
      } catch (const ConfigError& e) {
        fail(t.at("precision"), e.what());
      }
    }
    t.finish();
  }

  if (root.has("complexity")) {
    Section cx = root.child("complexity");
    c.complexity_n_rb = cx.count("n_rb");
    if (*c.complexity_n_rb == 0) fail(cx.at("n_rb"), "must be positive");
    cx.finish();
  }
  root.finish();
  return c;
}

json ExperimentConfig::to_json() const {
  json j;
  j["experiment"] = experiment;
  j["seed"] = seed;
  j["output_dir"] = output_dir;
  json data;
  data["n_ant"] = n_ant;
  data["train"] = grid_json(train_data);
  data["test"] = grid_json(test_data);
  data["zeroshot"] = json::array();
  for (const auto& g : zeroshot) data["zeroshot"].push_back(grid_json(g));
  j["data"] = data;
  j["models"] = json::array();
  for (const auto& m : models) j["models"].push_back(model_json(m));
  json t;
  t["epochs"] = train.epochs;
  t["batch_size"] = train.batch_size;
  t["learning_rate"] = train.learning_rate;
  t["switch_alpha"] = train.switch_alpha;
  t["patience"] = train.patience;
  t["validation_fraction"] = train.validation_fraction;
  t["precision"] = pipeline::precision_name(train.precision);
  j["train"] = t;
  if (complexity_n_rb) j["complexity"] = {{"n_rb", *complexity_n_rb}};
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

std::uint64_t train_data_seed(std::uint64_t master) { return numerics::derive_seed(master, 1); }
std::uint64_t test_data_seed(std::uint64_t master) { return numerics::derive_seed(master, 2); }
std::uint64_t zeroshot_data_seed(std::uint64_t master, std::size_t index) {
  return numerics::derive_seed(master, 100 + index);
}
std::uint64_t model_init_seed(std::uint64_t master, std::size_t index) {
  return numerics::derive_seed(master, 1000 + index);
}
std::uint64_t model_train_seed(std::uint64_t master, std::size_t index) {
  return numerics::derive_seed(master, 2000 + index);
}

}  // namespace moece::cli
