#pragma once

#include <optional>
#include <span>
#include <vector>

#include "aquadem/envs.hpp"
#include "aquadem/metrics.hpp"
#include "aquadem/nn.hpp"
#include "aquadem/quantizer.hpp"
#include "aquadem/rl.hpp"

namespace aquadem {

// Squared reconstruction error of a single-head quantizer; identical to the
// soft-min loss at K = 1.
double bc_loss(const QuantizerModel& model, std::span<const double> state,
               std::span<const double> action);

enum class DiscRegularization { kNone, kDropout, kWeightDecay };

struct DiscriminatorConfig {
  int hidden_layers = 1;
  int hidden_units = 64;
  DiscRegularization regularization = DiscRegularization::kDropout;
  double input_dropout = 0.5;
  double hidden_dropout = 0.5;
  double weight_decay = 0.01;
  bool observation_normalization = true;
  bool state_action_input = false;  // append a one-hot action index
};

// Expert-vs-agent classifier on (normalized) states. The normalizer comes
// from the demonstrations once and stays frozen.
class Discriminator {
 public:
  Discriminator(int state_dim, int n_actions, const DiscriminatorConfig& cfg,
                Rng& rng);

  void fit_normalizer(const std::vector<Vec>& demo_states);
  const Vec& normalizer_mean() const { return mean_; }
  const Vec& normalizer_std() const { return std_; }

  double logit(std::span<const double> state, int action_index = -1) const;
  // sigmoid(logit): probability the sample is expert.
  double expert_probability(std::span<const double> state,
                            int action_index = -1) const;

  nn::Mlp& net() { return net_; }
  const nn::Mlp& net() const { return net_; }
  const DiscriminatorConfig& config() const { return cfg_; }

  Vec normalized_input(std::span<const double> state, int action_index) const;

 private:
  DiscriminatorConfig cfg_;
  nn::Mlp net_;
  int state_dim_ = 0;
  int n_actions_ = 0;
  Vec mean_, std_;
};

struct DiscSample {
  Vec state;
  int action_index = -1;
};

struct DiscLossResult {
  double loss = 0.0;
  Vec grad;
};

// Binary cross-entropy with demonstrations labeled 1 and agent samples 0,
// averaged per sample; adds the weight-decay term when configured. Dropout
// (when configured) uses the provided rng.
DiscLossResult discriminator_loss(const Discriminator& disc,
                                  std::span<const DiscSample> demo_batch,
                                  std::span<const DiscSample> agent_batch,
                                  Rng& rng);

// The three confusion rewards, literal forms; p is the agent-class
// probability clipped to [1e-6, 1 - 1e-6]:
//   balance 0.0 -> -log p
//   balance 0.5 -> -0.5 log p + log(1 - p)   (quoted form)
//   balance 1.0 -> log(1 - p)
// symmetric_middle replaces the 0.5 form with -0.5 (log p - log(1 - p)).
double gail_reward(double p, double balance, bool symmetric_middle = false);

struct GailConfig {
  double reward_balance = 0.5;  // one of 0.0, 0.5, 1.0
  bool symmetric_middle = false;
  // Which class probability feeds gail_reward: the agent class (default) or
  // the expert class (the literal flip the spec leaves open).
  bool reward_on_expert_prob = false;
  double disc_learning_rate = 1e-3;
  int disc_updates_per_step = 1;
  int disc_batch = 64;
  DiscriminatorConfig disc;
  MdqnConfig learner;

  void validate() const;
};

struct GailEvalPoint {
  long step = 0;
  double success_rate = 0.0;
  double sinkhorn_distance = 0.0;
  double disc_loss = 0.0;
};

struct AquagailResult {
  nn::Mlp policy;
  Discriminator discriminator;
  std::vector<GailEvalPoint> trace;
};

// Discrete-action adversarial imitation: interleaves discriminator updates
// with Munchausen DQN updates whose rewards come from the current
// discriminator. The learner never reads the environment reward channel;
// demonstrations feed only the discriminator. n_step is pinned to 1 so
// rewards can be recomputed from the live discriminator at update time.
AquagailResult train_aquagail(DiscretizedEnv& denv, const DemoDataset& demos,
                              const GailConfig& cfg, std::uint64_t seed);

// Per-task RL on play-data discretization: an AQuaDQN run with the demo
// ratio forced to zero (play data never enters the replay buffer).
AquadqnResult train_aquaplay(PlayGridWorld& env,
                             const CandidateGenerator& play_gen,
                             const MdqnConfig& cfg, std::uint64_t seed);

}  // namespace aquadem
