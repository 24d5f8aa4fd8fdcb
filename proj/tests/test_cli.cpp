#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "aquadem/config.hpp"
#include "aquadem/errors.hpp"
#include "aquadem/runner.hpp"
#include "aquadem/text_io.hpp"

using namespace aquadem;
namespace fs = std::filesystem;

namespace {

// Desk-scale config shrunk further so the whole suite stays fast.
RunConfig tiny_config(const fs::path& root, const std::string& out_name) {
  RunConfig cfg = RunConfig::with_preset("desk");
  cfg.seed = 7;
  cfg.out = (root / out_name).string();
  cfg.quantizer.gradient_steps = 60;
  cfg.quantizer.batch_size = 16;
  cfg.quantizer.trunk_hidden = 16;
  cfg.quantizer.head_hidden = 16;
  cfg.rl.env_steps = 300;
  cfg.rl.warmup_steps = 40;
  cfg.rl.batch_size = 8;
  cfg.rl.eval_every = 150;
  cfg.rl.eval_episodes = 2;
  cfg.rl.q_hidden = {12};
  cfg.gail.disc.hidden_units = 8;
  cfg.gail.disc_batch = 8;
  cfg.metrics.cloud_cap = 200;
  return cfg;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) { return read_text_file(p); }

}  // namespace

TEST_CASE("config presets resolve, serialize, and round-trip") {
  for (const std::string name : {"desk", "paper-lfd", "paper-il",
                                 "paper-play"}) {
    RunConfig cfg = RunConfig::with_preset(name);
    auto j = cfg.to_json();
    RunConfig back = RunConfig::from_json(j);
    CHECK(back.to_json() == j);  // resolution is idempotent
  }
  CHECK(RunConfig::with_preset("paper-lfd").quantizer.gradient_steps == 50000);
  CHECK(RunConfig::with_preset("paper-lfd").quantizer.K == 10);
  CHECK(RunConfig::with_preset("paper-play").quantizer.K == 30);
  CHECK(RunConfig::with_preset("desk").rl.demo_ratio == 0.25);
  CHECK(RunConfig::with_preset("desk").rl.demo_min_reward == 0.01);
  CHECK_THROWS_AS(RunConfig::with_preset("atari"), InputError);
}

TEST_CASE("explicit config fields override the preset") {
  nlohmann::json j;
  j["preset"] = "paper-lfd";
  j["quantizer"] = {{"temperature", 0.5}};
  RunConfig cfg = RunConfig::from_json(j);
  CHECK(cfg.quantizer.temperature == 0.5);
  CHECK(cfg.quantizer.gradient_steps == 50000);  // preset value kept
}

TEST_CASE("gen-demos writes a deterministic, successful demo file") {
  TempDir tmp("aquadem_cli_gen");
  RunConfig cfg = tiny_config(tmp.path, "demos_a");
  cfg.env.demo_episodes = 25;
  runner::gen_demos(cfg);

  const fs::path file = tmp.path / "demos_a" / "demos.txt";
  REQUIRE(fs::exists(file));
  DemoDataset ds = DemoDataset::load(file);
  CHECK(ds.episodes.size() == 25);
  for (const auto& ep : ds.episodes) CHECK(*ep.back().reward == 1.0);

  cfg.out = (tmp.path / "demos_b").string();
  runner::gen_demos(cfg);
  CHECK(slurp(file) == slurp(tmp.path / "demos_b" / "demos.txt"));

  // Overwrite refusal without force.
  CHECK_THROWS_AS(runner::gen_demos(cfg), InputError);
  runner::Options force;
  force.force = true;
  CHECK_NOTHROW(runner::gen_demos(cfg, force));
}

TEST_CASE("train-quantizer emits a checkpoint and a finite loss trace") {
  TempDir tmp("aquadem_cli_tq");
  RunConfig demo_cfg = tiny_config(tmp.path, "demos");
  demo_cfg.env.demo_episodes = 5;
  runner::gen_demos(demo_cfg);

  RunConfig cfg = tiny_config(tmp.path, "quant");
  cfg.paths.demos = (tmp.path / "demos" / "demos.txt").string();
  const std::string demo_bytes = slurp(cfg.paths.demos);
  runner::train_quantizer(cfg);

  REQUIRE(fs::exists(tmp.path / "quant" / "quantizer.txt"));
  const std::string trace = slurp(tmp.path / "quant" / "loss_trace.csv");
  CHECK(trace.rfind("step,loss\n", 0) == 0);
  CHECK(std::count(trace.begin(), trace.end(), '\n') == 61);
  CHECK(trace.find("nan") == std::string::npos);
  CHECK(trace.find("inf") == std::string::npos);

  // Stage isolation: the input demos are untouched.
  CHECK(slurp(cfg.paths.demos) == demo_bytes);

  auto gen = load_generator_file(tmp.path / "quant" / "quantizer.txt");
  CHECK(gen->trait() == "aquadem");
  CHECK(gen->k() == 3);
}

TEST_CASE("replaying the resolved config reproduces artifacts byte for byte") {
  TempDir tmp("aquadem_cli_replay");
  RunConfig demo_cfg = tiny_config(tmp.path, "demos");
  demo_cfg.env.demo_episodes = 4;
  runner::gen_demos(demo_cfg);

  RunConfig cfg = tiny_config(tmp.path, "run1");
  cfg.paths.demos = (tmp.path / "demos" / "demos.txt").string();
  runner::train_quantizer(cfg);

  RunConfig replay = RunConfig::load_file(tmp.path / "run1" / "config.json");
  replay.out = (tmp.path / "run2").string();
  runner::train_quantizer(replay);

  CHECK(slurp(tmp.path / "run1" / "quantizer.txt") ==
        slurp(tmp.path / "run2" / "quantizer.txt"));
  CHECK(slurp(tmp.path / "run1" / "loss_trace.csv") ==
        slurp(tmp.path / "run2" / "loss_trace.csv"));
}

TEST_CASE("visualize writes csv and svg fields per checkpoint") {
  TempDir tmp("aquadem_cli_vis");
  RunConfig demo_cfg = tiny_config(tmp.path, "demos");
  demo_cfg.env.demo_episodes = 4;
  runner::gen_demos(demo_cfg);
  RunConfig qcfg = tiny_config(tmp.path, "quant");
  qcfg.quantizer.gradient_steps = 20;
  qcfg.paths.demos = (tmp.path / "demos" / "demos.txt").string();
  runner::train_quantizer(qcfg);

  RunConfig cfg = tiny_config(tmp.path, "fields");
  cfg.visualize.checkpoints = {(tmp.path / "quant" / "quantizer.txt").string()};
  cfg.visualize.grid = 8;
  runner::visualize(cfg);
  const std::string csv = slurp(tmp.path / "fields" / "field_quantizer.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 8 * 8 * 3);
  CHECK(slurp(tmp.path / "fields" / "field_quantizer.svg").find("<svg") == 0);
}

TEST_CASE("train dispatches every algorithm end to end at toy scale") {
  TempDir tmp("aquadem_cli_train");
  RunConfig demo_cfg = tiny_config(tmp.path, "demos");
  demo_cfg.env.demo_episodes = 4;
  runner::gen_demos(demo_cfg);
  const std::string demos = (tmp.path / "demos" / "demos.txt").string();

  RunConfig qcfg = tiny_config(tmp.path, "quant");
  qcfg.quantizer.gradient_steps = 30;
  qcfg.paths.demos = demos;
  runner::train_quantizer(qcfg);
  const std::string quant = (tmp.path / "quant" / "quantizer.txt").string();

  RunConfig dqn = tiny_config(tmp.path, "dqn");
  dqn.algo = "aquadqn";
  dqn.paths.demos = demos;
  dqn.paths.quantizer = quant;
  runner::train(dqn);
  CHECK(fs::exists(tmp.path / "dqn" / "policy.txt"));
  CHECK(slurp(tmp.path / "dqn" / "eval_trace.csv")
            .rfind("step,success_rate,mean_return,q_loss\n", 0) == 0);

  RunConfig bb = tiny_config(tmp.path, "bb");
  bb.algo = "bangbang_dqn";
  bb.rl.demo_ratio = 0.0;
  runner::train(bb);
  auto bb_gen = load_generator_file(tmp.path / "bb" / "discretizer.txt");
  CHECK(bb_gen->trait() == "bangbang");
  CHECK(bb_gen->k() == 9);

  RunConfig km = tiny_config(tmp.path, "km");
  km.algo = "aquadqn";
  km.candidates = "kmeans";
  km.paths.demos = demos;
  runner::train(km);
  CHECK(load_generator_file(tmp.path / "km" / "discretizer.txt")->trait() ==
        "kmeans");

  RunConfig rnd = tiny_config(tmp.path, "rnd");
  rnd.algo = "aquadqn";
  rnd.candidates = "random";
  rnd.paths.demos = demos;
  runner::train(rnd);
  CHECK(load_generator_file(tmp.path / "rnd" / "discretizer.txt")->trait() ==
        "random");

  RunConfig gail = tiny_config(tmp.path, "gail");
  gail.algo = "aquagail";
  gail.paths.demos = demos;
  gail.paths.quantizer = quant;
  runner::train(gail);
  CHECK(slurp(tmp.path / "gail" / "eval_trace.csv")
            .rfind("step,success_rate,sinkhorn_distance,disc_loss\n", 0) == 0);

  RunConfig bc = tiny_config(tmp.path, "bc");
  bc.algo = "bc";
  bc.paths.demos = demos;
  runner::train(bc);
  auto bc_gen = load_generator_file(tmp.path / "bc" / "bc_model.txt");
  CHECK(bc_gen->k() == 1);

  RunConfig mdn = tiny_config(tmp.path, "mdn");
  mdn.algo = "mdn";
  mdn.paths.demos = demos;
  runner::train(mdn);
  CHECK(slurp(tmp.path / "mdn" / "loss_trace.csv")
            .rfind("step,psi_loss,logit_loss\n", 0) == 0);

  RunConfig play = tiny_config(tmp.path, "play");
  play.algo = "aquaplay";
  play.env.name = "play_gridworld";
  play.env.task_id = 0;
  play.env.grid.max_steps = 60;
  play.paths.quantizer = quant;
  runner::train(play);
  CHECK(fs::exists(tmp.path / "play" / "policy.txt"));
}

TEST_CASE("eval reports metrics and refuses K mismatches") {
  TempDir tmp("aquadem_cli_eval");
  RunConfig demo_cfg = tiny_config(tmp.path, "demos");
  demo_cfg.env.demo_episodes = 4;
  runner::gen_demos(demo_cfg);
  const std::string demos = (tmp.path / "demos" / "demos.txt").string();

  RunConfig qcfg = tiny_config(tmp.path, "quant");
  qcfg.quantizer.gradient_steps = 20;
  qcfg.paths.demos = demos;
  runner::train_quantizer(qcfg);

  RunConfig dqn = tiny_config(tmp.path, "dqn");
  dqn.algo = "aquadqn";
  dqn.paths.demos = demos;
  dqn.paths.quantizer = (tmp.path / "quant" / "quantizer.txt").string();
  runner::train(dqn);

  RunConfig ev = tiny_config(tmp.path, "eval");
  ev.paths.demos = demos;
  ev.paths.policy = (tmp.path / "dqn" / "policy.txt").string();
  ev.paths.discretizer = (tmp.path / "dqn" / "discretizer.txt").string();
  runner::eval(ev);
  const std::string report = slurp(tmp.path / "eval" / "eval_report.csv");
  CHECK(report.rfind("success_rate,mean_return,sinkhorn_distance\n", 0) == 0);

  // Mismatched K: a 2-bin bang-bang grid has 4 actions, the policy expects 3.
  BangBangGenerator wrong(2, 2);
  save_generator_file(wrong, tmp.path / "wrong.txt");
  RunConfig bad = tiny_config(tmp.path, "eval_bad");
  bad.paths.demos = demos;
  bad.paths.policy = (tmp.path / "dqn" / "policy.txt").string();
  bad.paths.discretizer = (tmp.path / "wrong.txt").string();
  CHECK_THROWS_AS(runner::eval(bad), InputError);

  // Deterministic given the seed.
  RunConfig ev2 = ev;
  ev2.out = (tmp.path / "eval2").string();
  runner::eval(ev2);
  CHECK(slurp(tmp.path / "eval2" / "eval_report.csv") == report);
}

TEST_CASE("sweep expands a deterministic grid and sorts the summary") {
  TempDir tmp("aquadem_cli_sweep");
  RunConfig demo_cfg = tiny_config(tmp.path, "demos");
  demo_cfg.env.demo_episodes = 4;
  runner::gen_demos(demo_cfg);

  RunConfig cfg = tiny_config(tmp.path, "sweep");
  cfg.paths.demos = (tmp.path / "demos" / "demos.txt").string();
  cfg.quantizer.gradient_steps = 25;
  cfg.sweep.command = "train-quantizer";
  cfg.sweep.metric = "final_loss";
  cfg.sweep.grid = {{"quantizer.temperature", {0.0001, 0.001, 0.01}},
                    {"quantizer.k", {2, 3}}};
  runner::sweep(cfg);

  const std::string summary = slurp(tmp.path / "sweep" / "summary.csv");
  CHECK(summary.rfind("run,quantizer.k,quantizer.temperature,final_loss\n",
                      0) == 0);
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 7);  // 6 runs
  for (int i = 0; i < 6; ++i) {
    char name[16];
    std::snprintf(name, sizeof(name), "run_%03d", i);
    CHECK(fs::exists(tmp.path / "sweep" / name / "quantizer.txt"));
  }

  // Values in the metric column ascend.
  std::istringstream is(summary);
  std::string line;
  std::getline(is, line);
  double prev = -1e300;
  while (std::getline(is, line)) {
    const auto cols = split_on(line, ',');
    const double v = parse_double(cols.back());
    CHECK(v >= prev);
    prev = v;
  }

  RunConfig over = cfg;
  over.out = (tmp.path / "sweep_over").string();
  over.sweep.cap = 4;
  CHECK_THROWS_AS(runner::sweep(over), InputError);
}

TEST_CASE("the installed binary wires the subcommands") {
  const char* bin = std::getenv("AQUADEM_BIN");
  if (bin == nullptr) return;  // only wired through ctest
  TempDir tmp("aquadem_cli_bin");
  RunConfig cfg = tiny_config(tmp.path, "demos");
  cfg.env.demo_episodes = 3;
  const fs::path cfg_path = tmp.path / "cfg.json";
  cfg.save_file(cfg_path);

  const std::string cmd =
      std::string(bin) + " gen-demos --config " + cfg_path.string();
  CHECK(std::system(cmd.c_str()) == 0);
  CHECK(fs::exists(tmp.path / "demos" / "demos.txt"));

  // Unknown subcommand exits with the validation code.
  const std::string bad = std::string(bin) + " frobnicate 2>/dev/null";
  const int code = std::system(bad.c_str());
  CHECK(WEXITSTATUS(code) == 2);
}
