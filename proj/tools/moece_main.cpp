// moece: experiment runner for mixture-of-experts channel estimation.
//
// Exit codes: 0 success, 1 unexpected failure, 2 configuration or usage
// error, 3 training divergence, 4 I/O or file-format failure.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "moece/cli/config.hpp"
#include "moece/cli/runner.hpp"
#include "moece/error.hpp"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kDivergence = 3, kIo = 4 };

struct Flags {
  std::string config;
  std::optional<std::string> out;
  std::optional<unsigned long long> seed;
  bool force = false;
  unsigned threads = 1;
  bool quiet = false;
};

void add_flags(CLI::App* cmd, Flags& f, bool needs_out = true) {
  cmd->add_option("-c,--config", f.config, "experiment config (JSON) or run manifest")->required();
  if (needs_out) cmd->add_option("-o,--out", f.out, "output directory (default: config output_dir)");
  cmd->add_option("--seed", f.seed, "override the config's master seed");
  cmd->add_flag("--force", f.force, "overwrite existing artifacts");
  cmd->add_option("--threads", f.threads, "worker threads for generation and evaluation")
      ->check(CLI::Range(1u, 256u));
  cmd->add_flag("-q,--quiet", f.quiet, "suppress progress output");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"moece: mixture-of-experts channel estimation experiments"};
  app.require_subcommand(1);
  Flags f;

  struct Cmd {
    const char* name;
    const char* help;
  };
  const Cmd cmds[] = {
      {"generate", "generate the train/test/zero-shot datasets"},
      {"train", "train every configured model (generates missing datasets)"},
      {"eval", "evaluate trained models and the LS reference on the test set"},
      {"zeroshot", "evaluate trained models on the zero-shot datasets"},
      {"complexity", "print the MACs/FLOPs/parameter table"},
      {"validate", "check a config and print its normalized form"},
      {"run", "generate, train, evaluate, zero-shot and write a manifest"},
  };
  for (const auto& c : cmds) add_flags(app.add_subcommand(c.name, c.help), f, std::string(c.name) != "validate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    auto config = moece::cli::load_config(f.config);
    if (f.seed) config.seed = *f.seed;
    if (cmd == "validate") {
      std::cout << config.to_json().dump(2) << "\n";
      std::cerr << "config ok: " << config.models.size() << " model(s), "
                << config.train_data.sample_count() << " train / " << config.test_data.sample_count()
                << " test samples\n";
      return kOk;
    }

    moece::cli::RunOptions opts;
    opts.force = f.force;
    opts.threads = f.threads;
    opts.log = f.quiet ? nullptr : &std::cerr;
    if (cmd == "complexity") {
      if (f.out) opts.out = *f.out;
      moece::cli::cmd_complexity(config, opts, std::cout);
      return kOk;
    }
    opts.out = moece::cli::resolve_output(config, f.out);
    if (cmd == "generate")
      moece::cli::cmd_generate(config, opts);
    else if (cmd == "train")
      moece::cli::cmd_train(config, opts);
    else if (cmd == "eval")
      moece::cli::cmd_eval(config, opts);
    else if (cmd == "zeroshot")
      moece::cli::cmd_zeroshot(config, opts);
    else if (cmd == "run")
      moece::cli::cmd_run(config, opts);
    return kOk;
  } catch (const moece::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const moece::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kConfig;
  } catch (const moece::DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return kDivergence;
  } catch (const moece::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const moece::ParseError& e) {
    std::cerr << "file format error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
}
