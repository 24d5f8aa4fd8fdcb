#include "aquadem/envs.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "aquadem/errors.hpp"
#include "aquadem/mathutil.hpp"
#include "aquadem/text_io.hpp"

namespace aquadem {

namespace {

double clip01(double v) { return std::min(1.0, std::max(0.0, v)); }

}  // namespace

GridWorld::GridWorld(GridWorldConfig cfg) : cfg_(cfg) {}

bool GridWorld::in_goal(std::span<const double> s) const {
  return s[0] >= 1.0 - cfg_.goal_size && s[1] >= 1.0 - cfg_.goal_size;
}

bool GridWorld::in_start(std::span<const double> s) const {
  return s[0] <= cfg_.start_size && s[1] <= cfg_.start_size;
}

Vec GridWorld::reset(Rng& rng) {
  state_ = {rng.uniform(0.0, cfg_.start_size),
            rng.uniform(0.0, cfg_.start_size)};
  steps_ = 0;
  done_ = false;
  return state_;
}

GridWorld::Transition GridWorld::transition(std::span<const double> s,
                                            std::span<const double> action)
    const {
  if (action.size() != 2) {
    throw StructuralError("gridworld: action must be 2-dimensional");
  }
  if (!all_finite(action)) {
    throw NumericalError("gridworld: non-finite action");
  }
  const double norm = std::sqrt(action[0] * action[0] + action[1] * action[1]);
  Vec next{s[0], s[1]};
  if (norm >= 1e-8) {
    next[0] = clip01(s[0] + cfg_.step_length * action[0] / norm);
    next[1] = clip01(s[1] + cfg_.step_length * action[1] / norm);
  }
  const bool goal = in_goal(next);
  return {std::move(next), goal ? 1.0 : 0.0, goal};
}

StepResult GridWorld::step(std::span<const double> action) {
  Transition t = transition(state_, action);
  state_ = t.next;
  steps_ += 1;
  const bool done = t.goal || steps_ >= cfg_.max_steps;
  done_ = done;
  return {state_, RewardChannel(t.reward, &reward_reads_), done};
}

std::unique_ptr<ContinuousEnv> GridWorld::clone() const {
  return std::make_unique<GridWorld>(*this);
}

PlayGridWorld::PlayGridWorld(GridWorldConfig cfg, int n_goals, int task_id)
    : GridWorld(cfg), task_id_(task_id) {
  if (n_goals < 2 || n_goals > 4) {
    throw DomainError("play gridworld supports 2 to 4 goals");
  }
  const double h = cfg.goal_size / 2.0;
  const std::vector<Vec> all = {
      {1.0 - h, 1.0 - h}, {h, 1.0 - h}, {1.0 - h, h}, {0.5, 0.5}};
  goal_centers_.assign(all.begin(), all.begin() + n_goals);
  if (task_id_ >= n_goals) {
    throw DomainError("play gridworld: task_id out of range");
  }
}

bool PlayGridWorld::in_goal_region(int g, std::span<const double> s) const {
  const double h = cfg_.goal_size / 2.0;
  return std::abs(s[0] - goal_centers_[g][0]) <= h &&
         std::abs(s[1] - goal_centers_[g][1]) <= h;
}

Vec PlayGridWorld::reset(Rng& rng) { return GridWorld::reset(rng); }

StepResult PlayGridWorld::step(std::span<const double> action) {
  Transition t = transition(state_, action);
  state_ = t.next;
  steps_ += 1;
  double reward = 0.0;
  bool solved = false;
  if (task_id_ >= 0 && in_goal_region(task_id_, state_)) {
    reward = 1.0;
    solved = true;
  }
  const bool done = solved || steps_ >= cfg_.max_steps;
  done_ = done;
  return {state_, RewardChannel(reward, &reward_reads_), done};
}

std::unique_ptr<ContinuousEnv> PlayGridWorld::clone() const {
  return std::make_unique<PlayGridWorld>(*this);
}

std::string PlayGridWorld::name() const {
  return "play_gridworld_g" + std::to_string(n_goals());
}

Vec DemonstratorPolicy::action(std::span<const double> state, Rng& rng) const {
  const double edge = 1.0 - cfg_.step_length;
  const double bl = cfg_.bottom_left_threshold;
  if (state[0] < bl && state[1] < bl) {
    return rng.bernoulli(0.5) ? Vec{1.0, 0.0} : Vec{0.0, 1.0};
  }
  if (state[1] >= edge) return {1.0, 0.0};  // along the top edge, go right
  if (state[0] >= edge) return {0.0, 1.0};  // along the right edge, go up
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  return {inv_sqrt2, inv_sqrt2};
}

void PlayDemonstratorPolicy::reset(Rng& rng) {
  target_ = static_cast<int>(rng.uniform_index(goals_.size()));
}

Vec PlayDemonstratorPolicy::action(std::span<const double> state, Rng& rng) {
  if (target_ < 0) reset(rng);
  const double h = cfg_.goal_size / 2.0;
  auto arrived = [&](int g) {
    return std::abs(state[0] - goals_[g][0]) <= h &&
           std::abs(state[1] - goals_[g][1]) <= h;
  };
  // On arrival, wander off to a different goal.
  if (arrived(target_)) {
    int next = target_;
    while (next == target_) {
      next = static_cast<int>(rng.uniform_index(goals_.size()));
    }
    target_ = next;
  }
  const double dx = goals_[target_][0] - state[0];
  const double dy = goals_[target_][1] - state[1];
  const double norm = std::sqrt(dx * dx + dy * dy);
  if (norm < 1e-12) return {0.0, 0.0};
  return {dx / norm, dy / norm};
}

std::size_t DemoDataset::transition_count() const {
  std::size_t n = 0;
  for (const auto& ep : episodes) n += ep.size();
  return n;
}

int DemoDataset::state_dim() const {
  if (episodes.empty() || episodes[0].empty()) {
    throw InputError("empty demo dataset");
  }
  return static_cast<int>(episodes[0][0].state.size());
}

int DemoDataset::action_dim() const {
  if (episodes.empty() || episodes[0].empty()) {
    throw InputError("empty demo dataset");
  }
  return static_cast<int>(episodes[0][0].action.size());
}

Bounds DemoDataset::action_bounds() const {
  auto it = metadata.find("bounds");
  if (it == metadata.end()) {
    return Bounds(action_dim(), {-1.0, 1.0});
  }
  auto toks = split_whitespace(it->second);
  if (toks.size() % 2 != 0) throw InputError("bad bounds metadata");
  Bounds b;
  for (std::size_t i = 0; i + 1 < toks.size(); i += 2) {
    b.emplace_back(parse_double(toks[i]), parse_double(toks[i + 1]));
  }
  return b;
}

void DemoDataset::set_action_bounds(const Bounds& b) {
  std::string s;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (i > 0) s += ' ';
    s += format_double(b[i].first) + ' ' + format_double(b[i].second);
  }
  metadata["bounds"] = s;
}

std::vector<const DemoStep*> DemoDataset::flat_steps() const {
  std::vector<const DemoStep*> out;
  out.reserve(transition_count());
  for (const auto& ep : episodes) {
    for (const auto& st : ep) out.push_back(&st);
  }
  return out;
}

std::string DemoDataset::serialize() const {
  std::ostringstream os;
  os << "aquadem-demos v1\n";
  for (const auto& [key, value] : metadata) {
    os << "meta " << key << ' ' << value << '\n';
  }
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    for (std::size_t t = 0; t < episodes[e].size(); ++t) {
      const DemoStep& st = episodes[e][t];
      os << e << ' ' << t << " |";
      for (double v : st.state) os << ' ' << format_double(v);
      os << " |";
      for (double v : st.action) os << ' ' << format_double(v);
      os << " | ";
      os << (st.reward.has_value() ? format_double(*st.reward)
                                   : std::string("null"));
      os << " | " << (st.done ? 1 : 0) << '\n';
    }
  }
  return os.str();
}

DemoDataset DemoDataset::deserialize(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "aquadem-demos v1") {
    throw InputError("bad demo dataset header");
  }
  DemoDataset ds;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.rfind("meta ", 0) == 0) {
      const std::string rest = line.substr(5);
      const auto space = rest.find(' ');
      if (space == std::string::npos) throw InputError("bad meta line");
      ds.metadata[rest.substr(0, space)] = rest.substr(space + 1);
      continue;
    }
    auto fields = split_on(line, '|');
    if (fields.size() != 5) {
      throw InputError("demo dataset: expected 5 |-separated fields");
    }
    auto head = split_whitespace(fields[0]);
    if (head.size() != 2) throw InputError("demo dataset: bad episode/t");
    const std::size_t episode = static_cast<std::size_t>(parse_long(head[0]));
    if (episode >= ds.episodes.size()) ds.episodes.resize(episode + 1);

    DemoStep st;
    for (const auto& tok : split_whitespace(fields[1])) {
      st.state.push_back(parse_double(tok));
    }
    for (const auto& tok : split_whitespace(fields[2])) {
      st.action.push_back(parse_double(tok));
    }
    auto reward_toks = split_whitespace(fields[3]);
    if (reward_toks.size() != 1) throw InputError("demo dataset: bad reward");
    if (reward_toks[0] != "null") {
      st.reward = parse_double(reward_toks[0]);
    }
    auto done_toks = split_whitespace(fields[4]);
    if (done_toks.size() != 1) throw InputError("demo dataset: bad done");
    st.done = parse_long(done_toks[0]) != 0;
    ds.episodes[episode].push_back(std::move(st));
  }
  if (ds.episodes.empty()) throw InputError("demo dataset has no transitions");
  return ds;
}

void DemoDataset::save(const std::filesystem::path& path) const {
  write_text_file(path, serialize());
}

DemoDataset DemoDataset::load(const std::filesystem::path& path) {
  return deserialize(read_text_file(path));
}

DemoDataset generate_demos(ContinuousEnv& env,
                           const DemonstratorPolicy& policy, int n_episodes,
                           std::uint64_t seed, bool require_success) {
  if (n_episodes < 1) {
    throw InputError("generate_demos: n_episodes must be >= 1");
  }
  DemoDataset ds;
  Rng rng(seed);
  for (int e = 0; e < n_episodes; ++e) {
    std::vector<DemoStep> episode;
    Vec state = env.reset(rng);
    bool success = false;
    while (true) {
      Vec a = policy.action(state, rng);
      StepResult r = env.step(a);
      const double reward = r.reward.value();
      episode.push_back({state, a, reward, r.done});
      success = success || reward == 1.0;
      state = r.next;
      if (r.done) break;
    }
    if (require_success && !success) {
      throw StructuralError(
          "generate_demos: demonstrator failed to reach the goal in episode " +
          std::to_string(e));
    }
    ds.episodes.push_back(std::move(episode));
  }
  ds.metadata["env"] = env.name();
  ds.metadata["seed"] = std::to_string(seed);
  ds.metadata["generator"] = "gridworld-demonstrator-v1";
  ds.metadata["episodes"] = std::to_string(n_episodes);
  ds.metadata["state_dim"] = std::to_string(env.state_dim());
  ds.metadata["action_dim"] = std::to_string(env.action_dim());
  ds.set_action_bounds(env.action_bounds());
  return ds;
}

DemoDataset generate_play_demos(PlayGridWorld& env, int n_episodes,
                                std::uint64_t seed) {
  if (n_episodes < 1) {
    throw InputError("generate_play_demos: n_episodes must be >= 1");
  }
  if (env.task_id() >= 0) {
    throw DomainError("play demos must come from a task-free env (task_id=-1)");
  }
  DemoDataset ds;
  Rng rng(seed);
  PlayDemonstratorPolicy policy(env.config(), env.goal_centers());
  for (int e = 0; e < n_episodes; ++e) {
    std::vector<DemoStep> episode;
    Vec state = env.reset(rng);
    policy.reset(rng);
    while (true) {
      Vec a = policy.action(state, rng);
      StepResult r = env.step(a);
      // Play data carries no task reward.
      episode.push_back({state, a, std::nullopt, r.done});
      state = r.next;
      if (r.done) break;
    }
    ds.episodes.push_back(std::move(episode));
  }
  ds.metadata["env"] = env.name();
  ds.metadata["seed"] = std::to_string(seed);
  ds.metadata["generator"] = "play-demonstrator-v1";
  ds.metadata["episodes"] = std::to_string(n_episodes);
  ds.metadata["state_dim"] = std::to_string(env.state_dim());
  ds.metadata["action_dim"] = std::to_string(env.action_dim());
  ds.set_action_bounds(env.action_bounds());
  return ds;
}

DiscretizedEnv::DiscretizedEnv(ContinuousEnv& env,
                               const CandidateGenerator& gen)
    : env_(&env), gen_(&gen) {
  if (gen.action_dim() != env.action_dim()) {
    throw StructuralError("discretized env: action dimension mismatch");
  }
  if (gen.state_dim() >= 0 && gen.state_dim() != env.state_dim()) {
    throw StructuralError("discretized env: state dimension mismatch");
  }
}

StepResult DiscretizedEnv::step(int action_index) {
  if (action_index < 0 || action_index >= k()) {
    throw StructuralError("discretized env: action index out of range");
  }
  CandidateSet cs = gen_->candidates(env_->state());
  return env_->step(cs.actions[action_index]);
}

BangBangGenerator::BangBangGenerator(int bins_per_dim, int action_dim,
                                     int state_dim)
    : bins_(bins_per_dim), action_dim_(action_dim), state_dim_(state_dim) {
  if (bins_per_dim < 2) throw DomainError("bang-bang needs bins >= 2");
  if (action_dim < 1) throw DomainError("bang-bang needs action_dim >= 1");
  double k = 1.0;
  for (int d = 0; d < action_dim; ++d) k *= bins_per_dim;
  if (k > 1e6) {
    throw DomainError("bang-bang grid of " + std::to_string(bins_per_dim) +
                      "^" + std::to_string(action_dim) +
                      " actions refused (over the 1e6 cap)");
  }
  Vec levels(bins_per_dim);
  for (int i = 0; i < bins_per_dim; ++i) {
    levels[i] = -1.0 + 2.0 * i / (bins_per_dim - 1);
  }
  // The first dimension varies slowest.
  std::vector<int> idx(action_dim, 0);
  const std::size_t total = static_cast<std::size_t>(k);
  actions_.reserve(total);
  for (std::size_t n = 0; n < total; ++n) {
    Vec a(action_dim);
    for (int d = 0; d < action_dim; ++d) a[d] = levels[idx[d]];
    actions_.push_back(std::move(a));
    for (int d = action_dim - 1; d >= 0; --d) {
      if (++idx[d] < bins_per_dim) break;
      idx[d] = 0;
    }
  }
}

CandidateSet BangBangGenerator::candidates(std::span<const double> state)
    const {
  return {Vec(state.begin(), state.end()), actions_};
}

void BangBangGenerator::save(std::ostream& os) const {
  os << "aquadem-quantizer v1\n";
  os << "trait bangbang\n";
  os << "K " << k() << '\n';
  os << "temperature 0\n";
  os << "state_dim " << state_dim_ << '\n';
  os << "action_dim " << action_dim_ << '\n';
  os << "bounds";
  for (int d = 0; d < action_dim_; ++d) os << " -1 1";
  os << '\n';
  os << "bins " << bins_ << '\n';
}

BangBangGenerator BangBangGenerator::load_body(std::istream& is, int state_dim,
                                               int action_dim) {
  std::string word;
  int bins = 0;
  is >> word >> bins;
  if (word != "bins") throw InputError("bang-bang checkpoint: expected bins");
  return BangBangGenerator(bins, action_dim, state_dim);
}

}  // namespace aquadem
