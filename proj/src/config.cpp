#include "aquadem/config.hpp"

#include <fstream>

#include "aquadem/errors.hpp"
#include "aquadem/text_io.hpp"

namespace aquadem {

using nlohmann::json;

namespace {

template <typename T>
void read(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

void read_activation(const json& j, const char* key, nn::Activation& field) {
  if (j.contains(key)) {
    field = nn::activation_from_name(j.at(key).get<std::string>());
  }
}

const char* regularization_name(DiscRegularization r) {
  switch (r) {
    case DiscRegularization::kNone: return "none";
    case DiscRegularization::kDropout: return "dropout";
    case DiscRegularization::kWeightDecay: return "weight_decay";
  }
  throw StructuralError("unknown regularization tag");
}

DiscRegularization regularization_from_name(const std::string& name) {
  if (name == "none") return DiscRegularization::kNone;
  if (name == "dropout") return DiscRegularization::kDropout;
  if (name == "weight_decay") return DiscRegularization::kWeightDecay;
  throw InputError("unknown discriminator regularization: " + name);
}

json env_to_json(const EnvConfig& e) {
  return json{{"name", e.name},
              {"step_length", e.grid.step_length},
              {"start_size", e.grid.start_size},
              {"goal_size", e.grid.goal_size},
              {"max_steps", e.grid.max_steps},
              {"bottom_left_threshold", e.grid.bottom_left_threshold},
              {"play_goals", e.play_goals},
              {"task_id", e.task_id},
              {"demo_episodes", e.demo_episodes},
              {"bangbang_bins", e.bangbang_bins}};
}

void env_from_json(const json& j, EnvConfig& e) {
  read(j, "name", e.name);
  read(j, "step_length", e.grid.step_length);
  read(j, "start_size", e.grid.start_size);
  read(j, "goal_size", e.grid.goal_size);
  read(j, "max_steps", e.grid.max_steps);
  read(j, "bottom_left_threshold", e.grid.bottom_left_threshold);
  read(j, "play_goals", e.play_goals);
  read(j, "task_id", e.task_id);
  read(j, "demo_episodes", e.demo_episodes);
  read(j, "bangbang_bins", e.bangbang_bins);
}

json quantizer_to_json(const QuantizerTrainConfig& q) {
  return json{{"k", q.K},
              {"temperature", q.temperature},
              {"learning_rate", q.learning_rate},
              {"batch_size", q.batch_size},
              {"gradient_steps", q.gradient_steps},
              {"input_dropout", q.dropout.input_rate},
              {"hidden_dropout", q.dropout.hidden_rate},
              {"trunk_hidden", q.trunk_hidden},
              {"head_hidden", q.head_hidden},
              {"hidden_activation", nn::activation_name(q.hidden_activation)}};
}

void quantizer_from_json(const json& j, QuantizerTrainConfig& q) {
  read(j, "k", q.K);
  read(j, "temperature", q.temperature);
  read(j, "learning_rate", q.learning_rate);
  read(j, "batch_size", q.batch_size);
  read(j, "gradient_steps", q.gradient_steps);
  read(j, "input_dropout", q.dropout.input_rate);
  read(j, "hidden_dropout", q.dropout.hidden_rate);
  read(j, "trunk_hidden", q.trunk_hidden);
  read(j, "head_hidden", q.head_hidden);
  read_activation(j, "hidden_activation", q.hidden_activation);
}

json rl_to_json(const MdqnConfig& r) {
  json j{{"gamma", r.gamma},
         {"tau", r.tau},
         {"alpha", r.alpha},
         {"l0", r.l0},
         {"epsilon", r.epsilon},
         {"n_step", r.n_step},
         {"learning_rate", r.learning_rate},
         {"batch_size", r.batch_size},
         {"demo_ratio", r.demo_ratio},
         {"env_steps", r.env_steps},
         {"target_update_period", r.target_update_period},
         {"eval_every", r.eval_every},
         {"eval_episodes", r.eval_episodes},
         {"agent_buffer_capacity", r.agent_buffer_capacity},
         {"warmup_steps", r.warmup_steps},
         {"double_dqn", r.double_dqn},
         {"q_hidden", r.q_hidden}};
  if (r.demo_min_reward.has_value()) {
    j["demo_min_reward"] = *r.demo_min_reward;
  } else {
    j["demo_min_reward"] = nullptr;
  }
  return j;
}

void rl_from_json(const json& j, MdqnConfig& r) {
  read(j, "gamma", r.gamma);
  read(j, "tau", r.tau);
  read(j, "alpha", r.alpha);
  read(j, "l0", r.l0);
  read(j, "epsilon", r.epsilon);
  read(j, "n_step", r.n_step);
  read(j, "learning_rate", r.learning_rate);
  read(j, "batch_size", r.batch_size);
  read(j, "demo_ratio", r.demo_ratio);
  read(j, "env_steps", r.env_steps);
  read(j, "target_update_period", r.target_update_period);
  read(j, "eval_every", r.eval_every);
  read(j, "eval_episodes", r.eval_episodes);
  read(j, "agent_buffer_capacity", r.agent_buffer_capacity);
  read(j, "warmup_steps", r.warmup_steps);
  read(j, "double_dqn", r.double_dqn);
  read(j, "q_hidden", r.q_hidden);
  if (j.contains("demo_min_reward")) {
    if (j.at("demo_min_reward").is_null()) {
      r.demo_min_reward.reset();
    } else {
      r.demo_min_reward = j.at("demo_min_reward").get<double>();
    }
  }
}

json gail_to_json(const GailConfig& g) {
  return json{{"reward_balance", g.reward_balance},
              {"symmetric_middle", g.symmetric_middle},
              {"reward_on_expert_prob", g.reward_on_expert_prob},
              {"disc_learning_rate", g.disc_learning_rate},
              {"disc_updates_per_step", g.disc_updates_per_step},
              {"disc_batch", g.disc_batch},
              {"disc",
               json{{"hidden_layers", g.disc.hidden_layers},
                    {"hidden_units", g.disc.hidden_units},
                    {"regularization",
                     regularization_name(g.disc.regularization)},
                    {"input_dropout", g.disc.input_dropout},
                    {"hidden_dropout", g.disc.hidden_dropout},
                    {"weight_decay", g.disc.weight_decay},
                    {"observation_normalization",
                     g.disc.observation_normalization},
                    {"state_action_input", g.disc.state_action_input}}}};
}

void gail_from_json(const json& j, GailConfig& g) {
  read(j, "reward_balance", g.reward_balance);
  read(j, "symmetric_middle", g.symmetric_middle);
  read(j, "reward_on_expert_prob", g.reward_on_expert_prob);
  read(j, "disc_learning_rate", g.disc_learning_rate);
  read(j, "disc_updates_per_step", g.disc_updates_per_step);
  read(j, "disc_batch", g.disc_batch);
  if (j.contains("disc")) {
    const json& d = j.at("disc");
    read(d, "hidden_layers", g.disc.hidden_layers);
    read(d, "hidden_units", g.disc.hidden_units);
    if (d.contains("regularization")) {
      g.disc.regularization =
          regularization_from_name(d.at("regularization").get<std::string>());
    }
    read(d, "input_dropout", g.disc.input_dropout);
    read(d, "hidden_dropout", g.disc.hidden_dropout);
    read(d, "weight_decay", g.disc.weight_decay);
    read(d, "observation_normalization", g.disc.observation_normalization);
    read(d, "state_action_input", g.disc.state_action_input);
  }
}

}  // namespace

RunConfig RunConfig::with_preset(const std::string& name) {
  RunConfig cfg;
  cfg.preset = name;
  if (name == "desk") {
    // Struct defaults are the desk scale: gridworld-size networks, ~10x
    // fewer gradient steps than the paper tables.
    cfg.quantizer.K = 3;
    cfg.quantizer.temperature = 0.01;
    return cfg;
  }
  if (name == "paper-lfd") {
    cfg.quantizer = {3e-4, 256, 50000, {0.1, 0.1}, 0.001, 10,
                     1,    256, 256,   nn::Activation::kRelu};
    cfg.rl.learning_rate = 1e-4;
    cfg.rl.n_step = 3;
    cfg.rl.epsilon = 0.1;
    cfg.rl.demo_ratio = 0.25;
    cfg.rl.demo_min_reward = 0.01;
    cfg.rl.env_steps = 1000000;
    cfg.rl.eval_every = 50000;
    cfg.rl.eval_episodes = 30;
    cfg.rl.agent_buffer_capacity = 1000000;
    cfg.rl.target_update_period = 2500;
    cfg.rl.q_hidden = {512, 512, 256};
    return cfg;
  }
  if (name == "paper-il") {
    cfg.quantizer = {3e-4, 256, 50000, {0.0, 0.0}, 0.001, 10,
                     1,    256, 256,   nn::Activation::kRelu};
    cfg.rl.learning_rate = 3e-5;
    cfg.rl.n_step = 1;
    cfg.rl.epsilon = 0.01;
    cfg.rl.demo_ratio = 0.0;
    cfg.rl.demo_min_reward.reset();
    cfg.rl.env_steps = 1000000;
    cfg.rl.eval_every = 50000;
    cfg.rl.eval_episodes = 30;
    cfg.rl.agent_buffer_capacity = 1000000;
    cfg.rl.target_update_period = 2500;
    cfg.rl.q_hidden = {512, 512, 256};
    cfg.gail.disc_learning_rate = 1e-6;
    cfg.gail.disc.hidden_layers = 1;
    cfg.gail.disc.hidden_units = 64;
    cfg.gail.disc.regularization = DiscRegularization::kDropout;
    cfg.gail.disc.input_dropout = 0.5;
    cfg.gail.disc.hidden_dropout = 0.5;
    cfg.algo = "aquagail";
    return cfg;
  }
  if (name == "paper-play") {
    cfg.quantizer = {1e-3, 256, 50000, {0.1, 0.1}, 1e-4, 30,
                     1,    256, 256,   nn::Activation::kRelu};
    cfg.rl.learning_rate = 1e-4;
    cfg.rl.env_steps = 1000000;
    cfg.rl.eval_every = 50000;
    cfg.rl.eval_episodes = 30;
    cfg.rl.agent_buffer_capacity = 1000000;
    cfg.rl.target_update_period = 2500;
    cfg.rl.q_hidden = {512, 512, 256};
    cfg.rl.demo_ratio = 0.0;
    cfg.rl.demo_min_reward.reset();
    cfg.env.name = "play_gridworld";
    cfg.algo = "aquaplay";
    return cfg;
  }
  throw InputError("unknown preset: " + name +
                   " (expected desk, paper-lfd, paper-il, paper-play)");
}

RunConfig RunConfig::from_json(const json& j) {
  const std::string preset = j.value("preset", std::string("desk"));
  RunConfig cfg = with_preset(preset);
  if (j.contains("version") && j.at("version").get<int>() != 1) {
    throw InputError("unsupported config version");
  }
  read(j, "seed", cfg.seed);
  read(j, "out", cfg.out);
  read(j, "algo", cfg.algo);
  read(j, "candidates", cfg.candidates);
  if (j.contains("env")) env_from_json(j.at("env"), cfg.env);
  if (j.contains("quantizer")) quantizer_from_json(j.at("quantizer"), cfg.quantizer);
  if (j.contains("rl")) rl_from_json(j.at("rl"), cfg.rl);
  if (j.contains("gail")) gail_from_json(j.at("gail"), cfg.gail);
  if (j.contains("metrics")) {
    const json& m = j.at("metrics");
    read(m, "sinkhorn_epsilon", cfg.metrics.sinkhorn_epsilon);
    read(m, "sinkhorn_max_iters", cfg.metrics.sinkhorn_max_iters);
    read(m, "sinkhorn_tol", cfg.metrics.sinkhorn_tol);
    read(m, "cloud_cap", cfg.metrics.cloud_cap);
    read(m, "holdout_k", cfg.metrics.holdout_k);
    read(m, "holdout_repeats", cfg.metrics.holdout_repeats);
  }
  if (j.contains("paths")) {
    const json& p = j.at("paths");
    read(p, "demos", cfg.paths.demos);
    read(p, "quantizer", cfg.paths.quantizer);
    read(p, "policy", cfg.paths.policy);
    read(p, "discretizer", cfg.paths.discretizer);
  }
  if (j.contains("visualize")) {
    const json& v = j.at("visualize");
    read(v, "checkpoints", cfg.visualize.checkpoints);
    read(v, "grid", cfg.visualize.grid);
  }
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    read(s, "command", cfg.sweep.command);
    read(s, "cap", cfg.sweep.cap);
    read(s, "metric", cfg.sweep.metric);
    if (s.contains("grid")) {
      cfg.sweep.grid.clear();
      for (const auto& [key, values] : s.at("grid").items()) {
        if (!values.is_array() || values.empty()) {
          throw InputError("sweep grid values must be nonempty arrays");
        }
        cfg.sweep.grid[key] =
            std::vector<json>(values.begin(), values.end());
      }
    }
  }
  return cfg;
}

json RunConfig::to_json() const {
  json j;
  j["version"] = version;
  j["preset"] = preset;
  j["seed"] = seed;
  j["out"] = out;
  j["algo"] = algo;
  j["candidates"] = candidates;
  j["env"] = env_to_json(env);
  j["quantizer"] = quantizer_to_json(quantizer);
  j["rl"] = rl_to_json(rl);
  j["gail"] = gail_to_json(gail);
  j["metrics"] = json{{"sinkhorn_epsilon", metrics.sinkhorn_epsilon},
                      {"sinkhorn_max_iters", metrics.sinkhorn_max_iters},
                      {"sinkhorn_tol", metrics.sinkhorn_tol},
                      {"cloud_cap", metrics.cloud_cap},
                      {"holdout_k", metrics.holdout_k},
                      {"holdout_repeats", metrics.holdout_repeats}};
  j["paths"] = json{{"demos", paths.demos},
                    {"quantizer", paths.quantizer},
                    {"policy", paths.policy},
                    {"discretizer", paths.discretizer}};
  j["visualize"] = json{{"checkpoints", visualize.checkpoints},
                        {"grid", visualize.grid}};
  json grid = json::object();
  for (const auto& [key, values] : sweep.grid) {
    grid[key] = values;
  }
  j["sweep"] = json{{"command", sweep.command},
                    {"grid", grid},
                    {"cap", sweep.cap},
                    {"metric", sweep.metric}};
  return j;
}

RunConfig RunConfig::load_file(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw InputError("config parse error in " + path.string() + ": " +
                     e.what());
  }
  return from_json(j);
}

void RunConfig::save_file(const std::filesystem::path& path) const {
  write_text_file(path, to_json().dump(2) + "\n");
}

void RunConfig::validate() const {
  if (algo != "aquadqn" && algo != "aquagail" && algo != "aquaplay" &&
      algo != "bc" && algo != "mdn" && algo != "bangbang_dqn") {
    throw InputError("unknown algo: " + algo);
  }
  if (candidates != "quantizer" && candidates != "kmeans" &&
      candidates != "random" && candidates != "bangbang") {
    throw InputError("unknown candidates source: " + candidates);
  }
  if (env.name != "gridworld" && env.name != "play_gridworld") {
    throw InputError("unknown env: " + env.name);
  }
  rl.validate();
  gail.validate();
}

}  // namespace aquadem
