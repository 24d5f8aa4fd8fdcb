#pragma once

#include <deque>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "aquadem/envs.hpp"
#include "aquadem/metrics.hpp"
#include "aquadem/nn.hpp"
#include "aquadem/quantizer.hpp"

namespace aquadem {

struct MdqnConfig {
  double gamma = 0.99;
  double tau = 0.03;   // entropy temperature
  double alpha = 0.9;  // munchausen coefficient
  double l0 = -1.0;    // log-policy clip floor
  double epsilon = 0.1;
  int n_step = 3;
  double learning_rate = 1e-3;
  int batch_size = 64;
  double demo_ratio = 0.25;
  std::optional<double> demo_min_reward = 0.01;
  long env_steps = 20000;
  int target_update_period = 250;
  int eval_every = 2000;
  int eval_episodes = 20;
  long agent_buffer_capacity = 100000;
  int warmup_steps = 500;  // agent transitions required before updates
  bool double_dqn = false;
  std::vector<int> q_hidden = {128, 64};

  void validate() const;
};

// One learner transition, possibly spanning several environment steps.
struct Transition {
  Vec state;
  int action_index = 0;
  double n_step_reward = 0.0;
  double discount_to_bootstrap = 1.0;
  Vec next_state;
  bool done = false;
  bool is_demo = false;
};

struct StepRecord {
  Vec state;
  int action_index = 0;
  double reward = 0.0;
  Vec next;
  bool done = false;
};

// Folds a window of at most n consecutive step records into one transition:
// reward sum_{i<m} gamma^i r_i and bootstrap discount gamma^m. Windows
// shorter than n only occur at episode ends.
Transition accumulate_n_step(std::span<const StepRecord> window, double gamma,
                             int n, bool is_demo = false);

// Paired replay: a bounded FIFO of agent transitions plus a fixed set of
// demonstration transitions sampled at an exact per-batch ratio.
class DualReplay {
 public:
  DualReplay(long agent_capacity, double demo_ratio);

  void push_agent(Transition t);
  void add_demo(Transition t);
  std::size_t agent_size() const { return agent_.size(); }
  std::size_t demo_size() const { return demo_.size(); }
  double ratio() const { return demo_ratio_; }

  // Exactly round(ratio * batch_size) demo transitions, the rest agent, all
  // drawn uniformly with replacement.
  std::vector<const Transition*> sample(int batch_size, Rng& rng) const;

  long demo_samples_drawn() const { return demo_samples_drawn_; }

 private:
  long capacity_;
  double demo_ratio_;
  std::deque<Transition> agent_;
  std::vector<Transition> demo_;
  mutable long demo_samples_drawn_ = 0;
};

int act_greedy(std::span<const double> q_values);
// Argmax with probability 1-epsilon, uniform otherwise; argmax ties break to
// the lowest index.
int act_epsilon_greedy(std::span<const double> q_values, double epsilon,
                       Rng& rng);

// Munchausen DQN regression targets:
//   r_n + alpha tau clip(log pi(a|s), l0, 0)
//       + gamma_n sum_a' pi(a'|s') (Q_target(s',a') - tau log pi(a'|s'))
// with pi = softmax(Q_target / tau). Terminal transitions drop the bootstrap
// term. With alpha = 0, tau -> 0 this is the plain DQN max target.
std::vector<double> mdqn_target(std::span<const Transition* const> batch,
                                const nn::Mlp& online_q,
                                const nn::Mlp& target_q,
                                const MdqnConfig& cfg);

struct TdLossResult {
  double loss = 0.0;
  Vec grad;  // d loss / d online parameters
};

// Mean squared error between Q(s, a) and fixed targets; gradients flow only
// through the online network.
TdLossResult td_loss(std::span<const Transition* const> batch,
                     const nn::Mlp& online_q,
                     std::span<const double> targets);

// Projects demonstration episodes onto the generator's candidates, applies
// the optional reward floor, and accumulates n-step transitions.
std::vector<Transition> ingest_demos(const DemoDataset& demos,
                                     const CandidateGenerator& gen,
                                     const MdqnConfig& cfg);

struct EvalPoint {
  long step = 0;
  double success_rate = 0.0;
  double mean_return = 0.0;
  double q_loss = 0.0;
};

struct AquadqnResult {
  nn::Mlp policy;  // final online Q network
  std::vector<EvalPoint> trace;
};

// The interact / store / dual-sample / Munchausen-update loop with periodic
// target syncs and greedy evaluations. Deterministic given the seed.
AquadqnResult train_aquadqn(DiscretizedEnv& denv, const DemoDataset& demos,
                            const MdqnConfig& cfg, std::uint64_t seed);

// Builds the greedy continuous policy state -> candidate[argmax Q].
ContinuousPolicy greedy_policy(const nn::Mlp& qnet,
                               const CandidateGenerator& gen);

struct PolicyCheckpoint {
  nn::Mlp qnet;
  int k = 0;
  std::string discretizer_ref;

  void save(std::ostream& os) const;
  static PolicyCheckpoint load(std::istream& is);
  void save_file(const std::filesystem::path& path) const;
  static PolicyCheckpoint load_file(const std::filesystem::path& path);
};

}  // namespace aquadem
