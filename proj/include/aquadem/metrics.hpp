#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "aquadem/discretizer.hpp"
#include "aquadem/envs.hpp"

namespace aquadem {

struct EvalProtocol {
  int eval_every = 2000;
  int n_episodes = 20;
  bool greedy = true;  // evaluation runs without exploration noise
};

using ContinuousPolicy = std::function<Vec(std::span<const double>)>;

struct RolloutStats {
  double success_rate = 0.0;  // fraction of episodes with a goal event
  double mean_return = 0.0;   // undiscounted, averaged over episodes
  std::vector<Vec> visited_states;
};

// Greedy rollouts on a fresh clone of the environment. Deterministic given
// the seed; states are collected only when asked for (state-cloud metrics).
RolloutStats evaluate_policy(const ContinuousEnv& env,
                             const ContinuousPolicy& policy, int n_episodes,
                             std::uint64_t seed, bool collect_states = false);

double success_rate(const ContinuousEnv& env, const ContinuousPolicy& policy,
                    const EvalProtocol& protocol, std::uint64_t seed);

struct PointCloud {
  std::vector<Vec> points;
  Vec weights;

  // Uniform weights over the points.
  static PointCloud uniform(std::vector<Vec> pts);
  // Uniform subsample without replacement when the cloud exceeds cap.
  PointCloud subsampled(std::size_t cap, std::uint64_t seed) const;
  void validate() const;
};

struct SinkhornResult {
  double cost = 0.0;  // transport cost <P, C> of the entropic plan
  bool converged = false;
  double marginal_error = 0.0;  // L1 violation of both marginals
  int iterations = 0;
};

// Entropic-regularized OT with squared-Euclidean ground cost, computed with
// log-domain iterations and epsilon scaling (required for epsilon <= 1e-3 on
// unit-scale clouds). Non-convergence is flagged, not thrown.
SinkhornResult sinkhorn_distance(const PointCloud& x, const PointCloud& y,
                                 double epsilon, int max_iters = 20000,
                                 double tol = 1e-9);

struct HoldoutSummary {
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

// Distance between held-out demo episodes and the rest, resampled n_repeats
// times; the paper-style "human" reference band.
HoldoutSummary demo_holdout_distance(const DemoDataset& demos, int k_holdout,
                                     int n_repeats, std::uint64_t seed,
                                     double epsilon = 1e-2);

PointCloud demo_state_cloud(const DemoDataset& demos);

struct ActionFieldRecord {
  Vec state;
  int head = 0;
  Vec action;
};

std::vector<ActionFieldRecord> action_field_export(
    const CandidateGenerator& gen, const std::vector<Vec>& probe_grid);

// n x n grid of cell centers over the unit square.
std::vector<Vec> make_probe_grid(int n);

// Probe points within `radius` of at least one demonstration state.
std::vector<Vec> restrict_to_demo_support(const std::vector<Vec>& grid,
                                          const DemoDataset& demos,
                                          double radius = 0.05);

std::string action_field_csv(const std::vector<ActionFieldRecord>& records);
std::string action_field_svg(const std::vector<ActionFieldRecord>& records,
                             int n_heads);

}  // namespace aquadem
