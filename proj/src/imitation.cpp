#include "aquadem/imitation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "aquadem/errors.hpp"
#include "aquadem/kernels.hpp"
#include "aquadem/mathutil.hpp"

namespace aquadem {

double bc_loss(const QuantizerModel& model, std::span<const double> state,
               std::span<const double> action) {
  if (model.k() != 1) {
    throw StructuralError("bc_loss: behavioral cloning uses a K=1 model");
  }
  const CandidateSet cs = model.candidates(state);
  if (cs.actions[0].size() != action.size()) {
    throw StructuralError("bc_loss: action dimension mismatch");
  }
  return kernels::squared_distance(action.size(), cs.actions[0].data(),
                                   action.data());
}

Discriminator::Discriminator(int state_dim, int n_actions,
                             const DiscriminatorConfig& cfg, Rng& rng)
    : cfg_(cfg), state_dim_(state_dim), n_actions_(n_actions) {
  const int in_dim =
      cfg.state_action_input ? state_dim + n_actions : state_dim;
  std::vector<int> dims{in_dim};
  std::vector<nn::Activation> acts;
  for (int l = 0; l < cfg.hidden_layers; ++l) {
    dims.push_back(cfg.hidden_units);
    acts.push_back(nn::Activation::kRelu);
  }
  dims.push_back(1);
  acts.push_back(nn::Activation::kLinear);
  net_ = nn::Mlp(dims, acts, rng);
  mean_.assign(in_dim, 0.0);
  std_.assign(in_dim, 1.0);
}

void Discriminator::fit_normalizer(const std::vector<Vec>& demo_states) {
  if (!cfg_.observation_normalization || demo_states.empty()) return;
  // Normalization covers the state slots only; one-hot action slots pass
  // through untouched.
  for (int d = 0; d < state_dim_; ++d) {
    double m = 0.0;
    for (const Vec& s : demo_states) m += s[d];
    m /= demo_states.size();
    double var = 0.0;
    for (const Vec& s : demo_states) var += (s[d] - m) * (s[d] - m);
    var /= demo_states.size();
    mean_[d] = m;
    std_[d] = std::sqrt(var) > 1e-8 ? std::sqrt(var) : 1.0;
  }
}

Vec Discriminator::normalized_input(std::span<const double> state,
                                    int action_index) const {
  Vec in(net_.input_dim(), 0.0);
  for (int d = 0; d < state_dim_; ++d) {
    in[d] = (state[d] - mean_[d]) / std_[d];
  }
  if (cfg_.state_action_input) {
    if (action_index < 0 || action_index >= n_actions_) {
      throw StructuralError("discriminator: bad action index for s,a input");
    }
    in[state_dim_ + action_index] = 1.0;
  }
  return in;
}

double Discriminator::logit(std::span<const double> state,
                            int action_index) const {
  return net_.forward(normalized_input(state, action_index))[0];
}

double Discriminator::expert_probability(std::span<const double> state,
                                         int action_index) const {
  return sigmoid(logit(state, action_index));
}

DiscLossResult discriminator_loss(const Discriminator& disc,
                                  std::span<const DiscSample> demo_batch,
                                  std::span<const DiscSample> agent_batch,
                                  Rng& rng) {
  if (demo_batch.empty() || agent_batch.empty()) {
    throw InputError("discriminator_loss: both batches must be nonempty");
  }
  const nn::Mlp& net = disc.net();
  DiscLossResult result;
  result.grad.assign(net.param_count(), 0.0);
  const double inv_n =
      1.0 / static_cast<double>(demo_batch.size() + agent_batch.size());

  nn::DropoutConfig drop;
  if (disc.config().regularization == DiscRegularization::kDropout) {
    drop = {disc.config().input_dropout, disc.config().hidden_dropout};
  }

  nn::ForwardCache cache;
  Vec dout(1);
  auto accumulate = [&](const DiscSample& sample, bool is_demo) {
    const Vec in = disc.normalized_input(sample.state, sample.action_index);
    const double z = net.forward_train(in, drop, rng, cache)[0];
    // -log sigmoid(z) for demos, -log(1 - sigmoid(z)) for agent samples.
    result.loss += inv_n * (is_demo ? softplus(-z) : softplus(z));
    dout[0] = inv_n * (is_demo ? -sigmoid(-z) : sigmoid(z));
    net.backward(cache, dout, result.grad, nullptr);
  };
  for (const DiscSample& s : demo_batch) accumulate(s, true);
  for (const DiscSample& s : agent_batch) accumulate(s, false);

  if (disc.config().regularization == DiscRegularization::kWeightDecay) {
    const double wd = disc.config().weight_decay;
    auto params = net.params();
    double norm2 = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      norm2 += params[i] * params[i];
      result.grad[i] += wd * params[i];
    }
    result.loss += 0.5 * wd * norm2;
  }
  return result;
}

double gail_reward(double p, double balance, bool symmetric_middle) {
  p = std::min(1.0 - 1e-6, std::max(1e-6, p));
  if (balance == 0.0) return -std::log(p);
  if (balance == 1.0) return std::log1p(-p);
  if (balance == 0.5) {
    if (symmetric_middle) return -0.5 * (std::log(p) - std::log1p(-p));
    return -0.5 * std::log(p) + std::log1p(-p);
  }
  throw DomainError("gail_reward: balance must be 0.0, 0.5 or 1.0");
}

void GailConfig::validate() const {
  if (reward_balance != 0.0 && reward_balance != 0.5 &&
      reward_balance != 1.0) {
    throw DomainError("gail: reward_balance must be 0.0, 0.5 or 1.0");
  }
  if (disc_updates_per_step < 0) throw DomainError("gail: updates must be >= 0");
  if (disc_batch < 1) throw DomainError("gail: disc_batch must be >= 1");
  learner.validate();
}

AquagailResult train_aquagail(DiscretizedEnv& denv, const DemoDataset& demos,
                              const GailConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  MdqnConfig learner = cfg.learner;
  // Rewards come from the live discriminator at update time, so transitions
  // must stay single-step; demonstrations feed only the discriminator.
  learner.n_step = 1;
  learner.demo_ratio = 0.0;

  ContinuousEnv& env = denv.inner();
  const CandidateGenerator& gen = denv.generator();
  const int k = gen.k();

  std::vector<Vec> demo_states;
  std::vector<DiscSample> demo_samples;
  for (const auto& ep : demos.episodes) {
    for (const auto& st : ep) {
      demo_states.push_back(st.state);
      DiscSample sample;
      sample.state = st.state;
      if (cfg.disc.state_action_input) {
        sample.action_index = project_action(gen.candidates(st.state),
                                             st.action);
      }
      demo_samples.push_back(std::move(sample));
    }
  }
  if (demo_samples.empty()) throw InputError("train_aquagail: no demos");
  const PointCloud demo_cloud = demo_state_cloud(demos).subsampled(2000, seed);

  Rng rng(seed);
  std::vector<int> dims{env.state_dim()};
  dims.insert(dims.end(), learner.q_hidden.begin(), learner.q_hidden.end());
  dims.push_back(k);
  std::vector<nn::Activation> acts;
  acts.push_back(nn::Activation::kLayerNormTanh);
  for (std::size_t i = 1; i < learner.q_hidden.size(); ++i) {
    acts.push_back(nn::Activation::kElu);
  }
  acts.push_back(nn::Activation::kLinear);
  nn::Mlp online(dims, acts, rng);
  nn::Mlp target = online;

  AquagailResult result{online,
                        Discriminator(env.state_dim(), k, cfg.disc, rng),
                        {}};
  Discriminator& disc = result.discriminator;
  disc.fit_normalizer(demo_states);

  DualReplay replay(learner.agent_buffer_capacity, 0.0);
  auto q_adam =
      nn::AdamState::for_params(online.param_count(), learner.learning_rate);
  auto d_adam = nn::AdamState::for_params(disc.net().param_count(),
                                          cfg.disc_learning_rate);

  auto agent_class_prob = [&](std::span<const double> state, int action) {
    const double p_expert = disc.expert_probability(state, action);
    return cfg.reward_on_expert_prob ? p_expert : 1.0 - p_expert;
  };

  Vec state = denv.reset(rng);
  double disc_loss_accum = 0.0;
  long disc_loss_count = 0;
  int eval_index = 0;
  std::vector<Transition> batch_storage;
  std::vector<const Transition*> batch_ptrs;
  std::vector<DiscSample> agent_batch;

  for (long step = 1; step <= learner.env_steps; ++step) {
    const Vec q = online.forward(state);
    const int a = act_epsilon_greedy(q, learner.epsilon, rng);
    StepResult r = denv.step(a);
    // The environment reward channel is never read in this loop.
    Transition t;
    t.state = state;
    t.action_index = a;
    t.n_step_reward = 0.0;  // filled from the discriminator at update time
    t.discount_to_bootstrap = learner.gamma;
    t.next_state = r.next;
    t.done = r.done;
    replay.push_agent(std::move(t));
    state = r.done ? denv.reset(rng) : r.next;

    if (static_cast<long>(replay.agent_size()) >= learner.warmup_steps) {
      for (int u = 0; u < cfg.disc_updates_per_step; ++u) {
        std::vector<DiscSample> demo_batch;
        demo_batch.reserve(cfg.disc_batch);
        for (int i = 0; i < cfg.disc_batch; ++i) {
          demo_batch.push_back(
              demo_samples[rng.uniform_index(demo_samples.size())]);
        }
        agent_batch.clear();
        auto sampled = replay.sample(cfg.disc_batch, rng);
        for (const Transition* tr : sampled) {
          agent_batch.push_back({tr->state, cfg.disc.state_action_input
                                                ? tr->action_index
                                                : -1});
        }
        auto dl = discriminator_loss(disc, demo_batch, agent_batch, rng);
        if (!std::isfinite(dl.loss)) {
          throw NumericalError("train_aquagail: discriminator diverged at step " +
                               std::to_string(step));
        }
        nn::adam_step(disc.net().params(), dl.grad, d_adam);
        disc_loss_accum += dl.loss;
        disc_loss_count += 1;
      }

      auto sampled = replay.sample(learner.batch_size, rng);
      batch_storage.clear();
      batch_storage.reserve(sampled.size());
      for (const Transition* tr : sampled) {
        Transition copy = *tr;
        copy.n_step_reward =
            gail_reward(agent_class_prob(copy.state, copy.action_index),
                        cfg.reward_balance, cfg.symmetric_middle);
        batch_storage.push_back(std::move(copy));
      }
      batch_ptrs.clear();
      for (const Transition& tr : batch_storage) batch_ptrs.push_back(&tr);
      const auto targets = mdqn_target(batch_ptrs, online, target, learner);
      auto td = td_loss(batch_ptrs, online, targets);
      if (!std::isfinite(td.loss)) {
        throw NumericalError("train_aquagail: q loss diverged at step " +
                             std::to_string(step));
      }
      nn::adam_step(online.params(), td.grad, q_adam);
      if (step % learner.target_update_period == 0) target = online;
    }

    if (step % learner.eval_every == 0 || step == learner.env_steps) {
      if (!result.trace.empty() && result.trace.back().step == step) continue;
      auto stats = evaluate_policy(env, greedy_policy(online, gen),
                                   learner.eval_episodes,
                                   Rng(seed).derive(9000 + eval_index).seed(),
                                   /*collect_states=*/true);
      ++eval_index;
      const PointCloud agent_cloud =
          PointCloud::uniform(std::move(stats.visited_states))
              .subsampled(2000, seed);
      const double dist =
          sinkhorn_distance(agent_cloud, demo_cloud, 1e-2).cost;
      result.trace.push_back(
          {step, stats.success_rate, dist,
           disc_loss_count > 0 ? disc_loss_accum / disc_loss_count : 0.0});
      disc_loss_accum = 0.0;
      disc_loss_count = 0;
    }
  }
  result.policy = online;
  return result;
}

AquadqnResult train_aquaplay(PlayGridWorld& env,
                             const CandidateGenerator& play_gen,
                             const MdqnConfig& cfg, std::uint64_t seed) {
  if (env.task_id() < 0) {
    throw DomainError("train_aquaplay: env must carry a task id");
  }
  MdqnConfig task_cfg = cfg;
  // Play data never enters the replay buffer.
  task_cfg.demo_ratio = 0.0;
  task_cfg.demo_min_reward.reset();
  DiscretizedEnv denv(env, play_gen);
  DemoDataset unused;
  unused.episodes.push_back({});  // never touched at ratio 0
  return train_aquadqn(denv, unused, task_cfg, seed);
}

}  // namespace aquadem
