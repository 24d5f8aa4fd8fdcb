#pragma once

#include <filesystem>
#include <string>

#include "aquadem/config.hpp"

namespace aquadem::runner {

struct Options {
  bool force = false;
};

// Command implementations shared by the CLI and the acceptance suite. Each
// writes its artifacts plus the resolved config under cfg.out and throws
// aquadem errors on failure (the CLI maps them to exit codes).
void gen_demos(const RunConfig& cfg, const Options& opt = {});
void train_quantizer(const RunConfig& cfg, const Options& opt = {});
void visualize(const RunConfig& cfg, const Options& opt = {});
void train(const RunConfig& cfg, const Options& opt = {});
void eval(const RunConfig& cfg, const Options& opt = {});
void sweep(const RunConfig& cfg, const Options& opt = {});

// Dispatch by command name: gen-demos | train-quantizer | visualize | train |
// eval | sweep.
void run_command(const std::string& command, const RunConfig& cfg,
                 const Options& opt = {});

}  // namespace aquadem::runner
