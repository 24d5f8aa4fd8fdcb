#include "aquadem/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <sstream>

#include "aquadem/errors.hpp"
#include "aquadem/imitation.hpp"
#include "aquadem/metrics.hpp"
#include "aquadem/quantizer.hpp"
#include "aquadem/rl.hpp"
#include "aquadem/text_io.hpp"

namespace aquadem::runner {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path prepare_out(const RunConfig& cfg, const Options& opt) {
  const fs::path out(cfg.out);
  const fs::path marker = out / "config.json";
  if (fs::exists(marker) && !opt.force) {
    throw InputError("output directory already holds a run: " +
                     marker.string() + " (use --force to overwrite)");
  }
  fs::create_directories(out);
  cfg.save_file(marker);
  return out;
}

std::unique_ptr<ContinuousEnv> make_env(const RunConfig& cfg,
                                        bool task_free = false) {
  if (cfg.env.name == "gridworld") {
    return std::make_unique<GridWorld>(cfg.env.grid);
  }
  if (cfg.env.name == "play_gridworld") {
    return std::make_unique<PlayGridWorld>(cfg.env.grid, cfg.env.play_goals,
                                           task_free ? -1 : cfg.env.task_id);
  }
  throw InputError("unknown env: " + cfg.env.name);
}

DemoDataset load_demos(const RunConfig& cfg) {
  if (cfg.paths.demos.empty()) {
    throw InputError("this command needs paths.demos in the config");
  }
  return DemoDataset::load(cfg.paths.demos);
}

// The candidate source for a run: a trained checkpoint or one of the
// ablation generators built on the spot.
std::unique_ptr<CandidateGenerator> make_generator(const RunConfig& cfg,
                                                   const ContinuousEnv& env,
                                                   const DemoDataset* demos) {
  if (cfg.algo == "bangbang_dqn" || cfg.candidates == "bangbang") {
    return std::make_unique<BangBangGenerator>(cfg.env.bangbang_bins,
                                               env.action_dim(),
                                               env.state_dim());
  }
  if (cfg.candidates == "kmeans") {
    if (demos == nullptr) {
      throw InputError("kmeans candidates need paths.demos");
    }
    return std::make_unique<KmeansGenerator>(
        kmeans_candidates(*demos, cfg.quantizer.K, cfg.seed));
  }
  if (cfg.candidates == "random") {
    return std::make_unique<QuantizerModel>(random_candidates(
        env.state_dim(), env.action_dim(), cfg.quantizer.K,
        env.action_bounds(), cfg.seed, cfg.quantizer.trunk_hidden,
        cfg.quantizer.head_hidden));
  }
  if (cfg.paths.quantizer.empty()) {
    throw InputError("candidates=quantizer needs paths.quantizer");
  }
  return load_generator_file(cfg.paths.quantizer);
}

std::string csv_row(std::initializer_list<double> values) {
  std::string row;
  for (double v : values) {
    if (!row.empty()) row += ',';
    row += format_double(v);
  }
  return row + "\n";
}

void write_loss_trace(const fs::path& path, const std::vector<double>& trace) {
  std::string csv = "step,loss\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    csv += std::to_string(i) + ',' + format_double(trace[i]) + '\n';
  }
  write_text_file(path, csv);
}

void write_rl_trace(const fs::path& path,
                    const std::vector<EvalPoint>& trace) {
  std::string csv = "step,success_rate,mean_return,q_loss\n";
  for (const auto& pt : trace) {
    csv += std::to_string(pt.step) + ',' +
           csv_row({pt.success_rate, pt.mean_return, pt.q_loss});
  }
  write_text_file(path, csv);
}

void write_gail_trace(const fs::path& path,
                      const std::vector<GailEvalPoint>& trace) {
  std::string csv = "step,success_rate,sinkhorn_distance,disc_loss\n";
  for (const auto& pt : trace) {
    csv += std::to_string(pt.step) + ',' +
           csv_row({pt.success_rate, pt.sinkhorn_distance, pt.disc_loss});
  }
  write_text_file(path, csv);
}

double policy_sinkhorn(const RunConfig& cfg, const ContinuousEnv& env,
                       const ContinuousPolicy& policy,
                       const DemoDataset& demos) {
  auto stats = evaluate_policy(env, policy, cfg.rl.eval_episodes,
                               Rng(cfg.seed).derive(77).seed(),
                               /*collect_states=*/true);
  const auto agent_cloud =
      PointCloud::uniform(std::move(stats.visited_states))
          .subsampled(cfg.metrics.cloud_cap, cfg.seed);
  const auto demo_cloud =
      demo_state_cloud(demos).subsampled(cfg.metrics.cloud_cap, cfg.seed);
  return sinkhorn_distance(agent_cloud, demo_cloud,
                           cfg.metrics.sinkhorn_epsilon,
                           cfg.metrics.sinkhorn_max_iters,
                           cfg.metrics.sinkhorn_tol)
      .cost;
}

void train_value_policy(const RunConfig& cfg, const fs::path& out) {
  auto env = make_env(cfg);
  DemoDataset demos;
  const bool needs_demos =
      cfg.rl.demo_ratio > 0.0 || cfg.candidates == "kmeans";
  if (needs_demos) demos = load_demos(cfg);
  auto gen = make_generator(cfg, *env, needs_demos ? &demos : nullptr);

  AquadqnResult result = [&] {
    if (cfg.algo == "aquaplay") {
      auto* play = dynamic_cast<PlayGridWorld*>(env.get());
      if (play == nullptr) {
        throw InputError("aquaplay needs env.name = play_gridworld");
      }
      return train_aquaplay(*play, *gen, cfg.rl, cfg.seed);
    }
    DiscretizedEnv denv(*env, *gen);
    return train_aquadqn(denv, demos, cfg.rl, cfg.seed);
  }();

  PolicyCheckpoint cp{result.policy, gen->k(),
                      cfg.paths.quantizer.empty() ? gen->trait()
                                                  : cfg.paths.quantizer};
  cp.save_file(out / "policy.txt");
  save_generator_file(*gen, out / "discretizer.txt");
  write_rl_trace(out / "eval_trace.csv", result.trace);
}

void train_gail(const RunConfig& cfg, const fs::path& out) {
  auto env = make_env(cfg);
  DemoDataset demos = load_demos(cfg);
  auto gen = make_generator(cfg, *env, &demos);
  GailConfig gail = cfg.gail;
  gail.learner = cfg.rl;
  DiscretizedEnv denv(*env, *gen);
  AquagailResult result = train_aquagail(denv, demos, gail, cfg.seed);

  PolicyCheckpoint cp{result.policy, gen->k(),
                      cfg.paths.quantizer.empty() ? gen->trait()
                                                  : cfg.paths.quantizer};
  cp.save_file(out / "policy.txt");
  save_generator_file(*gen, out / "discretizer.txt");
  write_gail_trace(out / "eval_trace.csv", result.trace);
}

void train_bc(const RunConfig& cfg, const fs::path& out) {
  DemoDataset demos = load_demos(cfg);
  QuantizerTrainConfig qcfg = cfg.quantizer;
  qcfg.K = 1;  // behavioral cloning is the single-head case
  qcfg.seed = cfg.seed;
  auto result = ::aquadem::train_quantizer(demos, qcfg);
  {
    std::ostringstream os;
    result.model.save(os);
    write_text_file(out / "bc_model.txt", os.str());
  }
  write_loss_trace(out / "loss_trace.csv", result.loss_trace);

  auto env = make_env(cfg);
  const QuantizerModel& model = result.model;
  ContinuousPolicy policy = [&model](std::span<const double> s) {
    return model.candidates(s).actions[0];
  };
  auto stats = evaluate_policy(*env, policy, cfg.rl.eval_episodes,
                               Rng(cfg.seed).derive(77).seed());
  const double dist = policy_sinkhorn(cfg, *env, policy, demos);
  write_text_file(out / "eval_trace.csv",
                  "step,success_rate,sinkhorn_distance\n" +
                      std::to_string(qcfg.gradient_steps) + ',' +
                      csv_row({stats.success_rate, dist}));
}

void train_mdn_run(const RunConfig& cfg, const fs::path& out) {
  DemoDataset demos = load_demos(cfg);
  QuantizerTrainConfig qcfg = cfg.quantizer;
  qcfg.seed = cfg.seed;
  auto result = train_mdn(demos, qcfg);
  {
    std::ostringstream os;
    result.model.save(os);
    write_text_file(out / "mdn_model.txt", os.str());
  }
  std::string csv = "step,psi_loss,logit_loss\n";
  for (std::size_t i = 0; i < result.psi_trace.size(); ++i) {
    csv += std::to_string(i) + ',' +
           csv_row({result.psi_trace[i], result.logit_trace[i]});
  }
  write_text_file(out / "loss_trace.csv", csv);

  auto env = make_env(cfg);
  const MdnModel& model = result.model;
  auto policy_rng = std::make_shared<Rng>(Rng(cfg.seed).derive(42).seed());
  ContinuousPolicy policy = [&model, policy_rng](std::span<const double> s) {
    return model.sample_action(s, *policy_rng);
  };
  auto stats = evaluate_policy(*env, policy, cfg.rl.eval_episodes,
                               Rng(cfg.seed).derive(77).seed());
  const double dist = policy_sinkhorn(cfg, *env, policy, demos);
  write_text_file(out / "eval_trace.csv",
                  "step,success_rate,sinkhorn_distance\n" +
                      std::to_string(qcfg.gradient_steps) + ',' +
                      csv_row({stats.success_rate, dist}));
}

// Last-row metric lookup in a trace CSV written by this runner.
double read_metric(const fs::path& csv_path, const std::string& metric) {
  const std::string text = read_text_file(csv_path);
  std::istringstream is(text);
  std::string header, line, last;
  std::getline(is, header);
  while (std::getline(is, line)) {
    if (!line.empty()) last = line;
  }
  if (last.empty()) throw InputError("empty trace: " + csv_path.string());
  const auto cols = split_on(header, ',');
  const auto vals = split_on(last, ',');
  for (std::size_t i = 0; i < cols.size() && i < vals.size(); ++i) {
    if (cols[i] == metric || (metric == "final_loss" && cols[i] == "loss")) {
      return parse_double(vals[i]);
    }
  }
  throw InputError("metric " + metric + " not found in " + csv_path.string());
}

}  // namespace

void gen_demos(const RunConfig& cfg, const Options& opt) {
  cfg.validate();
  const fs::path out = prepare_out(cfg, opt);
  DemoDataset demos;
  if (cfg.env.name == "play_gridworld") {
    PlayGridWorld env(cfg.env.grid, cfg.env.play_goals, -1);
    demos = generate_play_demos(env, cfg.env.demo_episodes, cfg.seed);
  } else {
    GridWorld env(cfg.env.grid);
    DemonstratorPolicy policy(cfg.env.grid);
    demos = generate_demos(env, policy, cfg.env.demo_episodes, cfg.seed);
  }
  demos.save(out / "demos.txt");
}

void train_quantizer(const RunConfig& cfg, const Options& opt) {
  cfg.validate();
  const fs::path out = prepare_out(cfg, opt);
  DemoDataset demos = load_demos(cfg);
  QuantizerTrainConfig qcfg = cfg.quantizer;
  qcfg.seed = cfg.seed;
  auto result = ::aquadem::train_quantizer(demos, qcfg);
  save_generator_file(result.model, out / "quantizer.txt");
  write_loss_trace(out / "loss_trace.csv", result.loss_trace);
}

void visualize(const RunConfig& cfg, const Options& opt) {
  cfg.validate();
  if (cfg.visualize.checkpoints.empty()) {
    throw InputError("visualize needs at least one checkpoint");
  }
  const fs::path out = prepare_out(cfg, opt);
  const auto grid = make_probe_grid(cfg.visualize.grid);
  for (const std::string& ckpt : cfg.visualize.checkpoints) {
    auto gen = load_generator_file(ckpt);
    const auto records = action_field_export(*gen, grid);
    const std::string stem = fs::path(ckpt).stem().string();
    write_text_file(out / ("field_" + stem + ".csv"),
                    action_field_csv(records));
    write_text_file(out / ("field_" + stem + ".svg"),
                    action_field_svg(records, gen->k()));
  }
}

void train(const RunConfig& cfg, const Options& opt) {
  cfg.validate();
  const fs::path out = prepare_out(cfg, opt);
  if (cfg.algo == "aquadqn" || cfg.algo == "bangbang_dqn" ||
      cfg.algo == "aquaplay") {
    train_value_policy(cfg, out);
  } else if (cfg.algo == "aquagail") {
    train_gail(cfg, out);
  } else if (cfg.algo == "bc") {
    train_bc(cfg, out);
  } else if (cfg.algo == "mdn") {
    train_mdn_run(cfg, out);
  } else {
    throw InputError("unknown algo: " + cfg.algo);
  }
}

void eval(const RunConfig& cfg, const Options& opt) {
  cfg.validate();
  if (cfg.paths.policy.empty()) {
    throw InputError("eval needs paths.policy");
  }
  const fs::path out = prepare_out(cfg, opt);
  DemoDataset demos = load_demos(cfg);
  auto env = make_env(cfg);

  const std::string text = read_text_file(cfg.paths.policy);
  ContinuousPolicy policy;
  std::unique_ptr<CandidateGenerator> gen;
  PolicyCheckpoint cp;
  MdnModel mdn;
  QuantizerModel bc;
  auto policy_rng = std::make_shared<Rng>(Rng(cfg.seed).derive(42).seed());

  if (text.rfind("aquadem-policy", 0) == 0) {
    std::istringstream is(text);
    cp = PolicyCheckpoint::load(is);
    const std::string disc_path = !cfg.paths.discretizer.empty()
                                      ? cfg.paths.discretizer
                                      : cfg.paths.quantizer;
    if (disc_path.empty()) {
      throw InputError("eval of a value policy needs paths.discretizer");
    }
    gen = load_generator_file(disc_path);
    if (gen->k() != cp.k) {
      throw InputError("policy/discretizer mismatch: policy has K=" +
                       std::to_string(cp.k) + ", discretizer K=" +
                       std::to_string(gen->k()));
    }
    policy = greedy_policy(cp.qnet, *gen);
  } else if (text.rfind("aquadem-quantizer", 0) == 0) {
    std::istringstream probe(text);
    std::string header, trait_line;
    std::getline(probe, header);
    std::getline(probe, trait_line);
    if (trait_line == "trait mdn") {
      std::istringstream is(text);
      mdn = load_mdn(is);
      policy = [&mdn, policy_rng](std::span<const double> s) {
        return mdn.sample_action(s, *policy_rng);
      };
    } else {
      std::istringstream is(text);
      auto loaded = load_generator(is);
      auto* q = dynamic_cast<QuantizerModel*>(loaded.get());
      if (q == nullptr || q->k() != 1) {
        throw InputError(
            "eval: checkpoint is a discretizer, not a policy (only K=1 "
            "behavioral-cloning models act on their own)");
      }
      bc = *q;
      policy = [&bc](std::span<const double> s) {
        return bc.candidates(s).actions[0];
      };
    }
  } else {
    throw InputError("unrecognized checkpoint format: " + cfg.paths.policy);
  }

  auto stats = evaluate_policy(*env, policy, cfg.rl.eval_episodes,
                               Rng(cfg.seed).derive(77).seed());
  const double dist = policy_sinkhorn(cfg, *env, policy, demos);
  write_text_file(out / "eval_report.csv",
                  "success_rate,mean_return,sinkhorn_distance\n" +
                      csv_row({stats.success_rate, stats.mean_return, dist}));
}

void sweep(const RunConfig& cfg, const Options& opt) {
  cfg.validate();
  if (cfg.sweep.grid.empty()) throw InputError("sweep needs a nonempty grid");
  if (cfg.sweep.command != "train-quantizer" && cfg.sweep.command != "train") {
    throw InputError("sweep supports the train-quantizer and train commands");
  }
  long total = 1;
  for (const auto& [key, values] : cfg.sweep.grid) {
    total *= static_cast<long>(values.size());
  }
  if (total > cfg.sweep.cap) {
    throw InputError("sweep of " + std::to_string(total) +
                     " configurations exceeds the cap of " +
                     std::to_string(cfg.sweep.cap));
  }
  const fs::path out = prepare_out(cfg, opt);

  std::vector<std::string> keys;
  for (const auto& [key, values] : cfg.sweep.grid) keys.push_back(key);

  struct Row {
    long run = 0;
    std::vector<std::string> values;
    double metric = 0.0;
  };
  std::vector<Row> rows;

  std::vector<std::size_t> odo(keys.size(), 0);
  for (long run = 0; run < total; ++run) {
    json j = cfg.to_json();
    j["sweep"]["grid"] = json::object();  // sub-runs are plain commands
    Row row;
    row.run = run;
    for (std::size_t i = 0; i < keys.size(); ++i) {
      const json& value = cfg.sweep.grid.at(keys[i])[odo[i]];
      std::string pointer = "/" + keys[i];
      std::replace(pointer.begin(), pointer.end(), '.', '/');
      j[json::json_pointer(pointer)] = value;
      row.values.push_back(value.dump());
    }
    char name[32];
    std::snprintf(name, sizeof(name), "run_%03ld", run);
    j["out"] = (out / name).string();
    RunConfig sub = RunConfig::from_json(j);
    run_command(cfg.sweep.command, sub, opt);

    const fs::path trace = cfg.sweep.command == "train-quantizer"
                               ? out / name / "loss_trace.csv"
                               : out / name / "eval_trace.csv";
    row.metric = read_metric(trace, cfg.sweep.metric);
    rows.push_back(std::move(row));

    // Odometer over sorted keys, first key slowest.
    for (std::size_t i = keys.size(); i-- > 0;) {
      if (++odo[i] < cfg.sweep.grid.at(keys[i]).size()) break;
      odo[i] = 0;
    }
  }

  const bool descending =
      cfg.sweep.metric == "success_rate" || cfg.sweep.metric == "mean_return";
  std::stable_sort(rows.begin(), rows.end(),
                   [descending](const Row& a, const Row& b) {
                     return descending ? a.metric > b.metric
                                       : a.metric < b.metric;
                   });

  std::string csv = "run";
  for (const auto& key : keys) csv += ',' + key;
  csv += ',' + cfg.sweep.metric + '\n';
  for (const Row& row : rows) {
    char name[32];
    std::snprintf(name, sizeof(name), "run_%03ld", row.run);
    csv += name;
    for (const auto& v : row.values) csv += ',' + v;
    csv += ',' + format_double(row.metric) + '\n';
  }
  write_text_file(out / "summary.csv", csv);
}

void run_command(const std::string& command, const RunConfig& cfg,
                 const Options& opt) {
  if (command == "gen-demos") return gen_demos(cfg, opt);
  if (command == "train-quantizer") return train_quantizer(cfg, opt);
  if (command == "visualize") return visualize(cfg, opt);
  if (command == "train") return train(cfg, opt);
  if (command == "eval") return eval(cfg, opt);
  if (command == "sweep") return sweep(cfg, opt);
  throw InputError("unknown command: " + command);
}

}  // namespace aquadem::runner
