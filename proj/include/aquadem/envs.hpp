#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aquadem/discretizer.hpp"
#include "aquadem/rng.hpp"

namespace aquadem {

// Reward wrapper that counts reads, so reward-free learners can prove they
// never touched the channel.
class RewardChannel {
 public:
  RewardChannel(double value, long* read_counter)
      : value_(value), reads_(read_counter) {}
  double value() const {
    if (reads_ != nullptr) ++*reads_;
    return value_;
  }

 private:
  double value_;
  long* reads_;
};

struct StepResult {
  Vec next;
  RewardChannel reward;
  bool done;
};

// A continuous-action episodic environment. Instances are single-owner
// mutable state machines; run one per thread.
class ContinuousEnv {
 public:
  virtual ~ContinuousEnv() = default;
  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual Bounds action_bounds() const = 0;
  virtual int max_steps() const = 0;
  virtual Vec reset(Rng& rng) = 0;
  virtual StepResult step(std::span<const double> action) = 0;
  virtual const Vec& state() const = 0;
  virtual int steps_taken() const = 0;
  virtual std::unique_ptr<ContinuousEnv> clone() const = 0;
  virtual std::string name() const = 0;

  long reward_reads() const { return reward_reads_; }

 protected:
  mutable long reward_reads_ = 0;
};

struct GridWorldConfig {
  double step_length = 0.05;
  double start_size = 0.1;  // start square side, anchored at the origin
  double goal_size = 0.1;   // goal square side, anchored at (1,1)
  int max_steps = 200;
  // Demonstrator geometry: where "bottom left" ends and how close to the top
  // or right border counts as being on that edge.
  double bottom_left_threshold = 0.3;
};

// Unit-square world with a sparse goal reward. Actions give the direction of
// a fixed-length step; positions are clipped to the square.
class GridWorld : public ContinuousEnv {
 public:
  explicit GridWorld(GridWorldConfig cfg = {});

  int state_dim() const override { return 2; }
  int action_dim() const override { return 2; }
  Bounds action_bounds() const override { return {{-1, 1}, {-1, 1}}; }
  int max_steps() const override { return cfg_.max_steps; }
  Vec reset(Rng& rng) override;
  StepResult step(std::span<const double> action) override;
  const Vec& state() const override { return state_; }
  int steps_taken() const override { return steps_; }
  std::unique_ptr<ContinuousEnv> clone() const override;
  std::string name() const override { return "gridworld"; }

  const GridWorldConfig& config() const { return cfg_; }
  bool in_goal(std::span<const double> s) const;
  bool in_start(std::span<const double> s) const;

  // Pure transition function; also used by dataset replay checks.
  struct Transition {
    Vec next;
    double reward;
    bool goal;
  };
  Transition transition(std::span<const double> s,
                        std::span<const double> action) const;

 protected:
  GridWorldConfig cfg_;
  Vec state_{0.0, 0.0};
  int steps_ = 0;
  bool done_ = true;
};

// Multi-goal variant for the play-data setup: several goal squares, a reward
// function per task. task_id < 0 means "play": no reward, episodes end only
// at the step cap.
class PlayGridWorld : public GridWorld {
 public:
  PlayGridWorld(GridWorldConfig cfg, int n_goals, int task_id);

  Vec reset(Rng& rng) override;
  StepResult step(std::span<const double> action) override;
  std::unique_ptr<ContinuousEnv> clone() const override;
  std::string name() const override;

  int n_goals() const { return static_cast<int>(goal_centers_.size()); }
  int task_id() const { return task_id_; }
  const std::vector<Vec>& goal_centers() const { return goal_centers_; }
  bool in_goal_region(int g, std::span<const double> s) const;

 private:
  std::vector<Vec> goal_centers_;
  int task_id_;
};

// Fig-2 style stochastic demonstrator: right or up (coin flip per step) in
// the bottom-left box, diagonal through the interior, along the top or right
// edge toward the goal.
class DemonstratorPolicy {
 public:
  explicit DemonstratorPolicy(const GridWorldConfig& cfg) : cfg_(cfg) {}
  Vec action(std::span<const double> state, Rng& rng) const;

 private:
  GridWorldConfig cfg_;
};

// Play demonstrator: walks toward a randomly chosen goal, picks a new one on
// arrival. Never ends episodes on its own.
class PlayDemonstratorPolicy {
 public:
  PlayDemonstratorPolicy(const GridWorldConfig& cfg,
                         std::vector<Vec> goal_centers)
      : cfg_(cfg), goals_(std::move(goal_centers)) {}
  Vec action(std::span<const double> state, Rng& rng);
  void reset(Rng& rng);

 private:
  GridWorldConfig cfg_;
  std::vector<Vec> goals_;
  int target_ = -1;
};

struct DemoStep {
  Vec state;
  Vec action;
  std::optional<double> reward;
  bool done = false;
};

struct DemoDataset {
  std::vector<std::vector<DemoStep>> episodes;
  // Ordered so the serialized header is deterministic.
  std::map<std::string, std::string> metadata;

  std::size_t transition_count() const;
  int state_dim() const;
  int action_dim() const;
  Bounds action_bounds() const;  // from metadata; [-1,1]^d fallback
  void set_action_bounds(const Bounds& b);

  // Flattened (state, action) training pairs.
  std::vector<const DemoStep*> flat_steps() const;

  std::string serialize() const;
  static DemoDataset deserialize(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static DemoDataset load(const std::filesystem::path& path);
};

// Rolls the demonstrator until every episode succeeds. Throws if an episode
// hits the step cap without reaching the goal (require_success) — that is a
// generator bug, not a recoverable condition.
DemoDataset generate_demos(ContinuousEnv& env, const DemonstratorPolicy& policy,
                           int n_episodes, std::uint64_t seed,
                           bool require_success = true);

DemoDataset generate_play_demos(PlayGridWorld& env, int n_episodes,
                                std::uint64_t seed);

// K-action view of a continuous env: step(k) applies the generator's k-th
// candidate at the current state.
class DiscretizedEnv {
 public:
  DiscretizedEnv(ContinuousEnv& env, const CandidateGenerator& gen);

  int k() const { return gen_->k(); }
  ContinuousEnv& inner() { return *env_; }
  const CandidateGenerator& generator() const { return *gen_; }

  Vec reset(Rng& rng) { return env_->reset(rng); }
  StepResult step(int action_index);
  const Vec& state() const { return env_->state(); }

 private:
  ContinuousEnv* env_;
  const CandidateGenerator* gen_;
};

// Cartesian product of per-dimension uniform grids over [-1, 1].
class BangBangGenerator : public CandidateGenerator {
 public:
  BangBangGenerator(int bins_per_dim, int action_dim, int state_dim = 2);

  int k() const override { return static_cast<int>(actions_.size()); }
  int state_dim() const override { return state_dim_; }
  int action_dim() const override { return action_dim_; }
  std::string trait() const override { return "bangbang"; }
  CandidateSet candidates(std::span<const double> state) const override;
  void save(std::ostream& os) const override;
  static BangBangGenerator load_body(std::istream& is, int state_dim,
                                     int action_dim);

  int bins_per_dim() const { return bins_; }

 private:
  int bins_;
  int action_dim_;
  int state_dim_;
  std::vector<Vec> actions_;
};

}  // namespace aquadem
