#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "aquadem/envs.hpp"
#include "aquadem/imitation.hpp"
#include "aquadem/quantizer.hpp"
#include "aquadem/rl.hpp"

namespace aquadem {

struct EnvConfig {
  std::string name = "gridworld";  // gridworld | play_gridworld
  GridWorldConfig grid;
  int play_goals = 3;
  int task_id = 0;
  int demo_episodes = 25;
  int bangbang_bins = 3;
};

struct MetricsRunConfig {
  double sinkhorn_epsilon = 1e-2;
  int sinkhorn_max_iters = 20000;
  double sinkhorn_tol = 1e-9;
  int cloud_cap = 2000;
  int holdout_k = 5;
  int holdout_repeats = 100;
};

struct PathsConfig {
  std::string demos;
  std::string quantizer;
  std::string policy;
  std::string discretizer;
};

struct VisualizeConfig {
  std::vector<std::string> checkpoints;
  int grid = 20;
};

struct SweepConfig {
  std::string command = "train-quantizer";
  // Dotted config paths to value lists, expanded as a deterministic grid
  // (sorted keys, first key slowest).
  std::map<std::string, std::vector<nlohmann::json>> grid;
  int cap = 64;
  std::string metric = "final_loss";
};

// One fully resolved experiment description. Every run writes its resolved
// form next to the artifacts; re-running from that copy is bit-identical.
struct RunConfig {
  int version = 1;
  std::string preset = "desk";
  std::uint64_t seed = 1;
  std::string out = "out";
  std::string algo = "aquadqn";
  // Candidate source for RL/IL runs: quantizer | kmeans | random | bangbang.
  std::string candidates = "quantizer";

  EnvConfig env;
  QuantizerTrainConfig quantizer;
  MdqnConfig rl;
  GailConfig gail;
  MetricsRunConfig metrics;
  PathsConfig paths;
  VisualizeConfig visualize;
  SweepConfig sweep;

  static RunConfig with_preset(const std::string& name);
  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  static RunConfig load_file(const std::filesystem::path& path);
  void save_file(const std::filesystem::path& path) const;

  void validate() const;
};

}  // namespace aquadem
