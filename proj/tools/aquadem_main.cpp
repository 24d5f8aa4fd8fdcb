#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "aquadem/config.hpp"
#include "aquadem/errors.hpp"
#include "aquadem/runner.hpp"

namespace {

struct CliArgs {
  std::string config_path;
  std::string command;
  long seed = -1;
  std::string out;
  std::string algo;
  bool force = false;
};

int dispatch(const CliArgs& args) {
  aquadem::RunConfig cfg = aquadem::RunConfig::load_file(args.config_path);
  if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
  if (!args.out.empty()) cfg.out = args.out;
  if (!args.algo.empty()) cfg.algo = args.algo;
  aquadem::runner::Options opt;
  opt.force = args.force;
  aquadem::runner::run_command(args.command, cfg, opt);
  return 0;
}

void add_common(CLI::App* cmd, CliArgs& args) {
  cmd->add_option("--config", args.config_path, "Run configuration (JSON)")
      ->required();
  cmd->add_option("--seed", args.seed, "Override the config seed");
  cmd->add_option("--out", args.out, "Override the output directory");
  cmd->add_flag("--force", args.force, "Overwrite existing run artifacts");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AQuaDem: demonstration-driven action quantization toolkit"};
  app.require_subcommand(1);
  CliArgs args;

  auto* gen = app.add_subcommand("gen-demos",
                                 "Generate demonstration episodes");
  add_common(gen, args);
  auto* tq = app.add_subcommand("train-quantizer",
                                "Train the action quantizer on demos");
  add_common(tq, args);
  auto* vis = app.add_subcommand("visualize",
                                 "Export candidate action fields (CSV + SVG)");
  add_common(vis, args);
  auto* tr = app.add_subcommand("train", "Train a downstream agent");
  add_common(tr, args);
  tr->add_option("--algo", args.algo,
                 "aquadqn | aquagail | aquaplay | bc | mdn | bangbang_dqn");
  auto* ev = app.add_subcommand("eval", "Evaluate a saved policy");
  add_common(ev, args);
  auto* sw = app.add_subcommand("sweep", "Run a deterministic grid sweep");
  add_common(sw, args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  for (auto* cmd : {gen, tq, vis, tr, ev, sw}) {
    if (cmd->parsed()) {
      args.command = cmd->get_name();
      break;
    }
  }

  try {
    return dispatch(args);
  } catch (const aquadem::NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
