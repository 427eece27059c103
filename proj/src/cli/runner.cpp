#include "moece/cli/runner.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "moece/error.hpp"
#include "moece/pipeline/evaluate.hpp"
#include "moece/pipeline/model.hpp"
#include "moece/pipeline/reports.hpp"
#include "moece/pipeline/train.hpp"

namespace moece::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "1.0.0";
constexpr const char* kLsName = "ls";

void say(const RunOptions& opts, const std::string& line) {
  if (opts.log) *opts.log << line << '\n' << std::flush;
}

void make_dirs(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create directory " + p.string() + ": " + ec.message());
}

bool non_empty_dir(const fs::path& p) {
  std::error_code ec;
  return fs::is_directory(p, ec) && !fs::is_empty(p, ec);
}

fs::path data_dir(const RunOptions& o) { return o.out / "data"; }
fs::path model_dir(const RunOptions& o, const std::string& name) { return o.out / "models" / name; }

struct DatasetPlan {
  std::string file;
  const GridConfig* grid;
  std::uint64_t seed;
};

std::vector<DatasetPlan> dataset_plans(const ExperimentConfig& c) {
  std::vector<DatasetPlan> plans{{"train.bin", &c.train_data, train_data_seed(c.seed)},
                                 {"test.bin", &c.test_data, test_data_seed(c.seed)}};
  for (std::size_t i = 0; i < c.zeroshot.size(); ++i)
    plans.push_back({"zeroshot_" + c.zeroshot[i].name + ".bin", &c.zeroshot[i], zeroshot_data_seed(c.seed, i)});
  return plans;
}

// Fingerprint of the dataset definitions, stored next to the binaries so a
// later command can tell whether they still match its config.
std::string datasets_json(const ExperimentConfig& c) {
  json j = json::object();
  j["n_ant"] = c.n_ant;
  j["format_version"] = channel::kDatasetFormatVersion;
  for (const auto& p : dataset_plans(c)) {
    json g;
    g["seed"] = p.seed;
    g["samples"] = p.grid->sample_count();
    g["profiles"] = p.grid->profiles;
    g["delay_spread_ns"] = p.grid->delay_spread_ns;
    g["snr_db"] = p.grid->snr_db;
    g["n_rb"] = p.grid->n_rb;
    g["samples_per_config"] = p.grid->samples_per_config;
    j[p.file] = g;
  }
  return j.dump(2) + "\n";
}

void write_datasets(const ExperimentConfig& c, const RunOptions& opts) {
  make_dirs(data_dir(opts));
  for (const auto& p : dataset_plans(c)) {
    say(opts, "[generate] " + p.file + ": " + std::to_string(p.grid->sample_count()) + " samples");
    const auto ds =
        channel::build_dataset(p.grid->profile_specs(), p.grid->links(c.n_ant), p.grid->samples_per_config, p.seed,
                               opts.threads);
    channel::save_dataset(ds, data_dir(opts) / p.file);
  }
  pipeline::write_text(data_dir(opts) / "datasets.json", datasets_json(c));
}

// Datasets are always read back from disk so every command sees the same
// (stored-precision) samples whether or not it generated them.
channel::Dataset load_named(const ExperimentConfig& c, const RunOptions& opts, const std::string& file) {
  const auto dir = data_dir(opts);
  if (!fs::exists(dir / "datasets.json")) write_datasets(c, opts);
  if (pipeline::read_text(dir / "datasets.json") != datasets_json(c))
    throw ConfigError("datasets in " + dir.string() +
                      " were generated from a different data section or seed; rerun 'generate' with --force");
  return channel::load_dataset(dir / file);
}

pipeline::Model build_model(const ModelConfig& m, std::uint64_t seed) {
  if (m.kind == ModelKind::Resnet) return pipeline::make_single_expert(m.backbone, seed, m.name);
  moe::MoEConfig mc;
  mc.expert = m.backbone;
  mc.n_experts = m.r;
  mc.k = m.k;
  mc.thresholds = m.thresholds;
  auto model = pipeline::make_moe(mc, seed, m.name);
  std::get<moe::MoEModel>(model.body).bias_at_eval = m.bias_at_eval;
  return model;
}

std::vector<pipeline::Model> load_models(const ExperimentConfig& c, const RunOptions& opts) {
  std::vector<pipeline::Model> out;
  out.push_back(pipeline::make_identity(kLsName));
  for (const auto& m : c.models) {
    const auto path = model_dir(opts, m.name) / "checkpoint.bin";
    if (!fs::exists(path)) throw IoError("missing checkpoint " + path.string() + "; run 'train' first");
    auto model = pipeline::load_checkpoint(path);
    model.name = m.name;
    out.push_back(std::move(model));
  }
  return out;
}

std::string fmt(double v, const char* spec = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

void write_report(const fs::path& dir, const std::string& prefix, const pipeline::EvalReport& rep, bool trace) {
  make_dirs(dir);
  pipeline::write_text(dir / (prefix + "eval.csv"), pipeline::eval_csv(rep.rows));
  pipeline::write_text(dir / (prefix + "usage.csv"), pipeline::usage_csv(rep.usage));
  if (trace) pipeline::write_text(dir / (prefix + "routing_trace.csv"), pipeline::trace_csv(rep.trace));
}

std::string model_label(const models::ResNetSpec& s) {
  return std::to_string(s.n_blocks) + "b" + std::to_string(s.channels) + "c";
}

}  // namespace

fs::path resolve_output(const ExperimentConfig& config, const std::optional<std::string>& cli_out) {
  if (cli_out && !cli_out->empty()) return fs::path(*cli_out);
  if (config.output_dir.empty())
    throw ConfigError("output_dir: not set in the config and no --out given");
  fs::path p(config.output_dir);
  if (p.is_relative())
    if (const char* root = std::getenv(kOutRootEnv); root && *root) p = fs::path(root) / p;
  return p;
}

void cmd_generate(const ExperimentConfig& config, const RunOptions& opts) {
  if (fs::exists(data_dir(opts) / "datasets.json") && !opts.force)
    throw IoError("datasets already exist in " + data_dir(opts).string() + " (use --force to regenerate)");
  write_datasets(config, opts);
}

void cmd_train(const ExperimentConfig& config, const RunOptions& opts) {
  const auto train_set = load_named(config, opts, "train.bin");
  for (std::size_t i = 0; i < config.models.size(); ++i) {
    const auto& mc = config.models[i];
    const auto dir = model_dir(opts, mc.name);
    if (fs::exists(dir / "checkpoint.bin") && !opts.force)
      throw IoError("checkpoint exists in " + dir.string() + " (use --force to retrain)");
    auto model = build_model(mc, model_init_seed(config.seed, i));
    auto tc = config.train;
    tc.seed = model_train_seed(config.seed, i);
    tc.balancer = mc.kind == ModelKind::Moe ? mc.balancer : pipeline::BalancerKind::None;
    const std::size_t total = tc.epochs;
    tc.on_epoch = [&](const pipeline::EpochRecord& r) {
      say(opts, "[train] " + mc.name + " epoch " + std::to_string(r.epoch) + "/" + std::to_string(total) +
                    " train_nmse=" + fmt(r.train_nmse) + " val_nmse=" + fmt(r.val_nmse) +
                    " max_usage=" + fmt(r.max_usage, "%.3f"));
    };
    say(opts, "[train] " + mc.name + ": " + std::to_string(model.parameter_count()) + " parameters");
    const auto hist = pipeline::train(model, train_set, tc);
    make_dirs(dir);
    pipeline::save_checkpoint(model, dir / "checkpoint.bin");
    pipeline::write_text(dir / "history.csv", pipeline::history_csv(hist.epochs));
  }
}

void cmd_eval(const ExperimentConfig& config, const RunOptions& opts) {
  const auto test_set = load_named(config, opts, "test.bin");
  auto models = load_models(config, opts);
  std::string summary = "model,dataset,mean_nmse_db\n";
  for (auto& m : models) {
    const auto rep = pipeline::evaluate(m, test_set, opts.threads);
    write_report(model_dir(opts, m.name), "", rep, true);
    say(opts, "[eval] " + m.name + " mean NMSE " + fmt(pipeline::mean_nmse_db(rep), "%.3f") + " dB");
    summary += m.name + ",test," + fmt(pipeline::mean_nmse_db(rep), "%.17g") + "\n";
  }
  pipeline::write_text(opts.out / "summary_test.csv", summary);
}

void cmd_zeroshot(const ExperimentConfig& config, const RunOptions& opts) {
  if (config.zeroshot.empty()) {
    say(opts, "[zeroshot] no zero-shot datasets configured");
    return;
  }
  auto models = load_models(config, opts);
  std::string summary = "model,dataset,mean_nmse_db\n";
  for (const auto& zs : config.zeroshot) {
    const auto ds = load_named(config, opts, "zeroshot_" + zs.name + ".bin");
    for (auto& m : models) {
      const auto rep = pipeline::zero_shot_eval(m, ds, opts.threads);
      write_report(model_dir(opts, m.name), "zeroshot_" + zs.name + "_", rep, false);
      say(opts, "[zeroshot] " + zs.name + " " + m.name + " mean NMSE " + fmt(pipeline::mean_nmse_db(rep), "%.3f") +
                    " dB");
      summary += m.name + "," + zs.name + "," + fmt(pipeline::mean_nmse_db(rep), "%.17g") + "\n";
    }
  }
  pipeline::write_text(opts.out / "summary_zeroshot.csv", summary);
}

std::vector<models::ComplexityReport> complexity_rows(const ExperimentConfig& config) {
  const std::size_t n_rb = config.complexity_n_rb.value_or(config.test_data.n_rb.front());
  const std::size_t h = config.n_ant;
  const std::size_t w = n_rb * channel::LinkConfig{}.pilots_per_rb;
  std::vector<models::ComplexityReport> rows;
  std::set<std::string> seen;
  auto add = [&](models::ComplexityReport r) {
    if (seen.insert(r.model).second) rows.push_back(std::move(r));
  };
  auto resnet = [&](models::ResNetSpec s) {
    auto r = models::count_resnet(s, h, w);
    r.model = "resnet-" + model_label(s);
    add(r);
  };
  auto moe_row = [&](const models::ResNetSpec& s, std::size_t r_, std::size_t k) {
    auto r = models::count_moe(s, {r_, s.io_channels}, k, h, w);
    r.model = "moe-top" + std::to_string(k) + "/" + std::to_string(r_) + "-" + model_label(s);
    add(r);
  };
  for (const auto& m : config.models) {
    if (m.kind == ModelKind::Resnet) {
      resnet(m.backbone);
      continue;
    }
    for (std::size_t k = 1; k <= std::min<std::size_t>(2, m.r); ++k) moe_row(m.backbone, m.r, k);
    if (m.k > 2) moe_row(m.backbone, m.r, m.k);
    for (std::size_t k : {std::size_t{1}, std::size_t{2}, m.k}) {
      if (k > m.r) continue;
      auto s = m.backbone;
      s.n_blocks *= k;
      resnet(s);
    }
  }
  return rows;
}

std::vector<models::ComplexityReport> cmd_complexity(const ExperimentConfig& config, const RunOptions& opts,
                                                     std::ostream& out) {
  const auto rows = complexity_rows(config);
  char line[160];
  std::snprintf(line, sizeof line, "%-24s %14s %14s %10s %12s\n", "model", "MACs", "FLOPs", "params", "size_bytes");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-24s %14llu %14llu %10llu %12llu\n", r.model.c_str(),
                  static_cast<unsigned long long>(r.macs), static_cast<unsigned long long>(r.flops),
                  static_cast<unsigned long long>(r.params), static_cast<unsigned long long>(r.model_size_bytes));
    out << line;
  }
  if (!opts.out.empty()) {
    make_dirs(opts.out);
    pipeline::write_text(opts.out / "complexity.csv", pipeline::complexity_csv(rows));
  }
  return rows;
}

std::string manifest_json(const ExperimentConfig& config) {
  json j;
  j["format"] = "moece-manifest";
  j["manifest_version"] = kManifestVersion;
  j["tool_version"] = kToolVersion;
  j["formats"] = {{"dataset", channel::kDatasetFormatVersion}, {"checkpoint", pipeline::kCheckpointFormatVersion}};
  json seeds;
  seeds["master"] = config.seed;
  seeds["train_data"] = train_data_seed(config.seed);
  seeds["test_data"] = test_data_seed(config.seed);
  json zs = json::object();
  for (std::size_t i = 0; i < config.zeroshot.size(); ++i)
    zs[config.zeroshot[i].name] = zeroshot_data_seed(config.seed, i);
  seeds["zeroshot_data"] = zs;
  json ms = json::object();
  for (std::size_t i = 0; i < config.models.size(); ++i)
    ms[config.models[i].name] = {{"init", model_init_seed(config.seed, i)}, {"train", model_train_seed(config.seed, i)}};
  seeds["models"] = ms;
  j["seeds"] = seeds;
  j["config"] = config.to_json();
  return j.dump(2) + "\n";
}

void cmd_run(const ExperimentConfig& config, const RunOptions& opts) {
  if (non_empty_dir(opts.out) && !opts.force)
    throw IoError("output directory " + opts.out.string() + " is not empty (use --force to overwrite)");
  make_dirs(opts.out);
  RunOptions forced = opts;
  forced.force = true;
  write_datasets(config, forced);
  cmd_train(config, forced);
  cmd_eval(config, forced);
  cmd_zeroshot(config, forced);
  std::ostringstream table;
  cmd_complexity(config, forced, table);
  say(opts, table.str());
  pipeline::write_text(opts.out / "manifest.json", manifest_json(config));
}

}  // namespace moece::cli
