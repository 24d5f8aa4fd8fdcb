#include "aquadem/rl.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "aquadem/errors.hpp"
#include "aquadem/mathutil.hpp"
#include "aquadem/text_io.hpp"

namespace aquadem {

void MdqnConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("gamma must be in (0,1)");
  if (!(tau > 0.0)) throw DomainError("tau must be positive");
  if (alpha < 0.0 || alpha > 1.0) throw DomainError("alpha must be in [0,1]");
  if (l0 > 0.0) throw DomainError("l0 must be <= 0");
  if (epsilon < 0.0 || epsilon > 1.0) {
    throw DomainError("epsilon must be in [0,1]");
  }
  if (n_step < 1) throw DomainError("n_step must be >= 1");
  if (batch_size < 1) throw DomainError("batch_size must be >= 1");
  if (demo_ratio < 0.0 || demo_ratio > 1.0) {
    throw DomainError("demo_ratio must be in [0,1]");
  }
  if (agent_buffer_capacity < 1) throw DomainError("buffer capacity >= 1");
}

Transition accumulate_n_step(std::span<const StepRecord> window, double gamma,
                             int n, bool is_demo) {
  if (window.empty()) throw StructuralError("accumulate_n_step: empty window");
  if (static_cast<int>(window.size()) > n) {
    throw StructuralError("accumulate_n_step: window longer than n");
  }
  for (std::size_t i = 0; i + 1 < window.size(); ++i) {
    if (window[i].done) {
      throw StructuralError("accumulate_n_step: done inside the window");
    }
  }
  Transition t;
  t.state = window.front().state;
  t.action_index = window.front().action_index;
  double discount = 1.0;
  double reward = 0.0;
  for (const StepRecord& r : window) {
    reward += discount * r.reward;
    discount *= gamma;
  }
  t.n_step_reward = reward;
  t.discount_to_bootstrap = discount;  // gamma^m
  t.next_state = window.back().next;
  t.done = window.back().done;
  t.is_demo = is_demo;
  return t;
}

DualReplay::DualReplay(long agent_capacity, double demo_ratio)
    : capacity_(agent_capacity), demo_ratio_(demo_ratio) {
  if (agent_capacity < 1) throw DomainError("replay capacity must be >= 1");
  if (demo_ratio < 0.0 || demo_ratio > 1.0) {
    throw DomainError("demo ratio must be in [0,1]");
  }
}

void DualReplay::push_agent(Transition t) {
  agent_.push_back(std::move(t));
  if (static_cast<long>(agent_.size()) > capacity_) agent_.pop_front();
}

void DualReplay::add_demo(Transition t) {
  t.is_demo = true;
  demo_.push_back(std::move(t));
}

std::vector<const Transition*> DualReplay::sample(int batch_size,
                                                  Rng& rng) const {
  if (batch_size < 1) throw DomainError("sample: batch_size must be >= 1");
  const int n_demo = static_cast<int>(std::lround(demo_ratio_ * batch_size));
  const int n_agent = batch_size - n_demo;
  if (n_demo > 0 && demo_.empty()) {
    throw InputError("dual replay: demo ratio > 0 but no demo transitions");
  }
  if (n_agent > 0 && agent_.empty()) {
    throw StructuralError("dual replay: sampling before any agent transition");
  }
  std::vector<const Transition*> batch;
  batch.reserve(batch_size);
  for (int i = 0; i < n_demo; ++i) {
    batch.push_back(&demo_[rng.uniform_index(demo_.size())]);
  }
  demo_samples_drawn_ += n_demo;
  for (int i = 0; i < n_agent; ++i) {
    batch.push_back(&agent_[rng.uniform_index(agent_.size())]);
  }
  return batch;
}

int act_greedy(std::span<const double> q_values) {
  if (q_values.empty()) throw StructuralError("act_greedy: empty q values");
  int best = 0;
  for (std::size_t i = 1; i < q_values.size(); ++i) {
    if (q_values[i] > q_values[best]) best = static_cast<int>(i);
  }
  return best;
}

int act_epsilon_greedy(std::span<const double> q_values, double epsilon,
                       Rng& rng) {
  if (epsilon < 0.0 || epsilon > 1.0) {
    throw DomainError("act_epsilon_greedy: epsilon must be in [0,1]");
  }
  if (rng.uniform01() < epsilon) {
    return static_cast<int>(rng.uniform_index(q_values.size()));
  }
  return act_greedy(q_values);
}

namespace {

// log softmax(q / tau), stable for tau down to ~1e-300.
void log_policy(std::span<const double> q, double tau, std::vector<double>& out) {
  out.resize(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) out[i] = q[i] / tau;
  const double lse = logsumexp(out);
  for (double& v : out) v -= lse;
}

}  // namespace

std::vector<double> mdqn_target(std::span<const Transition* const> batch,
                                const nn::Mlp& online_q,
                                const nn::Mlp& target_q,
                                const MdqnConfig& cfg) {
  if (batch.empty()) throw StructuralError("mdqn_target: empty batch");
  std::vector<double> targets;
  targets.reserve(batch.size());
  std::vector<double> logpi, logpi_sel;
  for (const Transition* t : batch) {
    double target = t->n_step_reward;

    if (cfg.alpha != 0.0) {
      const Vec q_cur = target_q.forward(t->state);
      if (!all_finite(q_cur)) {
        throw NumericalError("mdqn_target: non-finite Q values");
      }
      log_policy(q_cur, cfg.tau, logpi);
      const double clipped =
          std::min(0.0, std::max(cfg.l0, logpi[t->action_index]));
      target += cfg.alpha * cfg.tau * clipped;
    }

    if (!t->done) {
      const Vec q_next = target_q.forward(t->next_state);
      if (!all_finite(q_next)) {
        throw NumericalError("mdqn_target: non-finite Q values");
      }
      // Policy from the target net, or the online net behind the
      // double-DQN flag; values always from the target net.
      if (cfg.double_dqn) {
        const Vec q_sel = online_q.forward(t->next_state);
        log_policy(q_sel, cfg.tau, logpi_sel);
      } else {
        log_policy(q_next, cfg.tau, logpi_sel);
      }
      double soft = 0.0;
      for (std::size_t a = 0; a < q_next.size(); ++a) {
        const double pi = std::exp(logpi_sel[a]);
        if (pi > 0.0) soft += pi * (q_next[a] - cfg.tau * logpi_sel[a]);
      }
      target += t->discount_to_bootstrap * soft;
    }
    targets.push_back(target);
  }
  return targets;
}

TdLossResult td_loss(std::span<const Transition* const> batch,
                     const nn::Mlp& online_q,
                     std::span<const double> targets) {
  if (batch.size() != targets.size()) {
    throw StructuralError("td_loss: batch/target size mismatch");
  }
  TdLossResult result;
  result.grad.assign(online_q.param_count(), 0.0);
  const double inv_batch = 1.0 / batch.size();
  nn::ForwardCache cache;
  Rng fake(0);
  Vec dout(online_q.output_dim());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Transition* t = batch[i];
    const Vec q = online_q.forward_train(t->state, {}, fake, cache);
    const double diff = q[t->action_index] - targets[i];
    result.loss += diff * diff * inv_batch;
    std::fill(dout.begin(), dout.end(), 0.0);
    dout[t->action_index] = 2.0 * diff * inv_batch;
    online_q.backward(cache, dout, result.grad, nullptr);
  }
  return result;
}

std::vector<Transition> ingest_demos(const DemoDataset& demos,
                                     const CandidateGenerator& gen,
                                     const MdqnConfig& cfg) {
  if (gen.action_dim() != demos.action_dim()) {
    throw StructuralError("ingest_demos: action dimension mismatch");
  }
  std::vector<Transition> out;
  std::vector<StepRecord> records;
  for (const auto& ep : demos.episodes) {
    records.clear();
    records.reserve(ep.size());
    for (std::size_t t = 0; t < ep.size(); ++t) {
      StepRecord r;
      r.state = ep[t].state;
      r.action_index = project_action(gen.candidates(ep[t].state), ep[t].action);
      double reward = ep[t].reward.value_or(0.0);
      if (cfg.demo_min_reward.has_value()) {
        reward = std::max(reward, *cfg.demo_min_reward);
      }
      r.reward = reward;
      r.next = t + 1 < ep.size() ? ep[t + 1].state : ep[t].state;
      r.done = ep[t].done;
      records.push_back(std::move(r));
    }
    for (std::size_t t = 0; t < records.size(); ++t) {
      const std::size_t m =
          std::min<std::size_t>(cfg.n_step, records.size() - t);
      out.push_back(accumulate_n_step(
          std::span(records.data() + t, m), cfg.gamma, cfg.n_step, true));
    }
  }
  return out;
}

ContinuousPolicy greedy_policy(const nn::Mlp& qnet,
                               const CandidateGenerator& gen) {
  return [&qnet, &gen](std::span<const double> state) {
    const Vec q = qnet.forward(state);
    return gen.candidates(state).actions[act_greedy(q)];
  };
}

AquadqnResult train_aquadqn(DiscretizedEnv& denv, const DemoDataset& demos,
                            const MdqnConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ContinuousEnv& env = denv.inner();
  const CandidateGenerator& gen = denv.generator();
  const int k = gen.k();

  Rng rng(seed);
  std::vector<int> dims{env.state_dim()};
  dims.insert(dims.end(), cfg.q_hidden.begin(), cfg.q_hidden.end());
  dims.push_back(k);
  std::vector<nn::Activation> acts;
  acts.push_back(nn::Activation::kLayerNormTanh);
  for (std::size_t i = 1; i < cfg.q_hidden.size(); ++i) {
    acts.push_back(nn::Activation::kElu);
  }
  acts.push_back(nn::Activation::kLinear);
  nn::Mlp online(dims, acts, rng);
  nn::Mlp target = online;

  DualReplay replay(cfg.agent_buffer_capacity, cfg.demo_ratio);
  if (cfg.demo_ratio > 0.0) {
    for (Transition& t : ingest_demos(demos, gen, cfg)) {
      replay.add_demo(std::move(t));
    }
  }

  auto adam = nn::AdamState::for_params(online.param_count(),
                                        cfg.learning_rate);

  AquadqnResult result{online, {}};
  std::deque<StepRecord> window;
  Vec state = denv.reset(rng);
  double loss_accum = 0.0;
  long loss_count = 0;
  int eval_index = 0;

  auto emit = [&](std::size_t count) {
    // Emits transitions for `count` window starts, consuming from the front.
    for (std::size_t i = 0; i < count; ++i) {
      std::vector<StepRecord> w(window.begin(), window.end());
      replay.push_agent(accumulate_n_step(std::span(w), cfg.gamma, cfg.n_step));
      window.pop_front();
    }
  };

  for (long step = 1; step <= cfg.env_steps; ++step) {
    const Vec q = online.forward(state);
    const int a = act_epsilon_greedy(q, cfg.epsilon, rng);
    StepResult r = denv.step(a);
    const double reward = r.reward.value();
    window.push_back({state, a, reward, r.next, r.done});
    if (r.done) {
      emit(window.size());
      state = denv.reset(rng);
    } else {
      if (window.size() == static_cast<std::size_t>(cfg.n_step)) emit(1);
      state = r.next;
    }

    if (static_cast<long>(replay.agent_size()) >= cfg.warmup_steps) {
      auto batch = replay.sample(cfg.batch_size, rng);
      const auto targets = mdqn_target(batch, online, target, cfg);
      auto td = td_loss(batch, online, targets);
      if (!std::isfinite(td.loss)) {
        throw NumericalError("train_aquadqn: loss diverged at step " +
                             std::to_string(step));
      }
      nn::adam_step(online.params(), td.grad, adam);
      loss_accum += td.loss;
      loss_count += 1;
      if (step % cfg.target_update_period == 0) target = online;
    }

    if (step % cfg.eval_every == 0 || step == cfg.env_steps) {
      if (!result.trace.empty() && result.trace.back().step == step) continue;
      auto stats = evaluate_policy(env, greedy_policy(online, gen),
                                   cfg.eval_episodes,
                                   Rng(seed).derive(9000 + eval_index).seed());
      ++eval_index;
      result.trace.push_back({step, stats.success_rate, stats.mean_return,
                              loss_count > 0 ? loss_accum / loss_count : 0.0});
      loss_accum = 0.0;
      loss_count = 0;
    }
  }
  result.policy = online;
  return result;
}

void PolicyCheckpoint::save(std::ostream& os) const {
  os << "aquadem-policy v1\n";
  os << "K " << k << '\n';
  os << "discretizer_ref " << discretizer_ref << '\n';
  os << "qnet\n";
  qnet.save(os);
}

PolicyCheckpoint PolicyCheckpoint::load(std::istream& is) {
  std::string word, version;
  is >> word >> version;
  if (word != "aquadem-policy" || version != "v1") {
    throw InputError("bad policy checkpoint header");
  }
  PolicyCheckpoint cp;
  is >> word >> cp.k;
  if (word != "K") throw InputError("policy checkpoint: expected K");
  is >> word;
  if (word != "discretizer_ref") {
    throw InputError("policy checkpoint: expected discretizer_ref");
  }
  std::getline(is, cp.discretizer_ref);
  if (!cp.discretizer_ref.empty() && cp.discretizer_ref.front() == ' ') {
    cp.discretizer_ref.erase(cp.discretizer_ref.begin());
  }
  is >> word;
  if (word != "qnet") throw InputError("policy checkpoint: expected qnet");
  cp.qnet = nn::Mlp::load(is);
  if (cp.qnet.output_dim() != cp.k) {
    throw InputError("policy checkpoint: K does not match the network");
  }
  return cp;
}

void PolicyCheckpoint::save_file(const std::filesystem::path& path) const {
  std::ostringstream os;
  save(os);
  write_text_file(path, os.str());
}

PolicyCheckpoint PolicyCheckpoint::load_file(
    const std::filesystem::path& path) {
  std::istringstream is(read_text_file(path));
  return load(is);
}

}  // namespace aquadem
