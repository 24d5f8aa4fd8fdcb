#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "aquadem/envs.hpp"
#include "aquadem/errors.hpp"
#include "aquadem/rng.hpp"

using namespace aquadem;

TEST_CASE("reset lands in the start region and is seed deterministic") {
  GridWorld env;
  Rng r1(5), r2(5);
  Vec a = env.reset(r1);
  CHECK(env.in_start(a));
  GridWorld env2;
  Vec b = env2.reset(r2);
  CHECK(a == b);
}

TEST_CASE("reset statistics match uniform sampling over the start square") {
  GridWorld env;
  Rng rng(31);
  double mx = 0.0, my = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    Vec s = env.reset(rng);
    mx += s[0];
    my += s[1];
  }
  mx /= n;
  my /= n;
  // Center of the 0.1-side start square is (0.05, 0.05); 2% tolerance.
  CHECK(std::abs(mx - 0.05) < 0.001);
  CHECK(std::abs(my - 0.05) < 0.001);
}

TEST_CASE("step arithmetic, clipping, and the goal event") {
  GridWorld env;

  auto t1 = env.transition(Vec{0.05, 0.05}, Vec{1.0, 0.0});
  CHECK(t1.next[0] == doctest::Approx(0.10).epsilon(1e-12));
  CHECK(t1.next[1] == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(t1.reward == 0.0);

  auto t2 = env.transition(Vec{0.99, 0.5}, Vec{1.0, 0.0});
  CHECK(t2.next[0] == 1.0);
  CHECK(t2.next[1] == doctest::Approx(0.5));

  // From (0.88, 0.88) a diagonal step of length 0.05 crosses into the
  // [0.9, 1]^2 goal square.
  auto t3 = env.transition(Vec{0.88, 0.88}, Vec{1.0, 1.0});
  CHECK(t3.next[0] == doctest::Approx(0.88 + 0.05 / std::sqrt(2.0)));
  CHECK(t3.goal);
  CHECK(t3.reward == 1.0);
}

TEST_CASE("zero action does not move and non-finite actions are rejected") {
  GridWorld env;
  auto t = env.transition(Vec{0.4, 0.4}, Vec{0.0, 0.0});
  CHECK(t.next == Vec{0.4, 0.4});
  CHECK_THROWS_AS(env.transition(Vec{0.4, 0.4}, Vec{std::nan(""), 0.0}),
                  NumericalError);
  CHECK_THROWS_AS(env.transition(Vec{0.4, 0.4}, Vec{1.0}), StructuralError);
}

TEST_CASE("episodes stay inside bounds and reward is 1 iff in goal") {
  GridWorld env;
  Rng rng(9);
  env.reset(rng);
  for (int i = 0; i < 400; ++i) {
    Vec a{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    StepResult r = env.step(a);
    CHECK(r.next[0] >= 0.0);
    CHECK(r.next[0] <= 1.0);
    CHECK(r.next[1] >= 0.0);
    CHECK(r.next[1] <= 1.0);
    const double reward = r.reward.value();
    CHECK(reward == (env.in_goal(r.next) ? 1.0 : 0.0));
    if (r.done) env.reset(rng);
  }
}

TEST_CASE("demonstrator follows the region rules") {
  GridWorldConfig cfg;
  DemonstratorPolicy demo(cfg);
  Rng rng(4);

  int right = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    Vec a = demo.action(Vec{0.05, 0.05}, rng);
    const bool is_right = a[0] == 1.0 && a[1] == 0.0;
    const bool is_up = a[0] == 0.0 && a[1] == 1.0;
    CHECK((is_right || is_up));
    right += is_right ? 1 : 0;
  }
  CHECK(std::abs(right / static_cast<double>(n) - 0.5) < 0.02);

  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  Vec a = demo.action(Vec{0.5, 0.5}, rng);
  CHECK(a[0] == doctest::Approx(inv_sqrt2));
  CHECK(a[1] == doctest::Approx(inv_sqrt2));

  CHECK(demo.action(Vec{0.5, 1.0}, rng) == Vec{1.0, 0.0});
  CHECK(demo.action(Vec{1.0, 0.5}, rng) == Vec{0.0, 1.0});
}

TEST_CASE("demonstrator actions always have unit norm") {
  GridWorldConfig cfg;
  DemonstratorPolicy demo(cfg);
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    Vec s{rng.uniform(0, 1), rng.uniform(0, 1)};
    Vec a = demo.action(s, rng);
    CHECK(std::sqrt(a[0] * a[0] + a[1] * a[1]) == doctest::Approx(1.0));
  }
}

TEST_CASE("generated demos all reach the goal and replay exactly") {
  GridWorld env;
  DemonstratorPolicy demo(env.config());
  DemoDataset ds = generate_demos(env, demo, 25, 7);
  CHECK(ds.episodes.size() == 25);

  for (const auto& ep : ds.episodes) {
    REQUIRE(!ep.empty());
    CHECK(*ep.back().reward == 1.0);
    CHECK(ep.back().done);
    // Replay: each stored next state comes from the pure transition.
    for (std::size_t t = 0; t + 1 < ep.size(); ++t) {
      auto tr = env.transition(ep[t].state, ep[t].action);
      for (int d = 0; d < 2; ++d) {
        CHECK(std::abs(tr.next[d] - ep[t + 1].state[d]) < 1e-12);
      }
    }
  }
}

TEST_CASE("demo generation is byte deterministic and round-trips") {
  GridWorld env1, env2;
  DemonstratorPolicy demo(env1.config());
  DemoDataset a = generate_demos(env1, demo, 5, 99);
  DemoDataset b = generate_demos(env2, demo, 5, 99);
  CHECK(a.serialize() == b.serialize());

  const std::string text = a.serialize();
  DemoDataset loaded = DemoDataset::deserialize(text);
  CHECK(loaded.serialize() == text);
  CHECK(loaded.action_bounds() == Bounds{{-1, 1}, {-1, 1}});
}

TEST_CASE("dataset save/load through the filesystem") {
  GridWorld env;
  DemonstratorPolicy demo(env.config());
  DemoDataset ds = generate_demos(env, demo, 3, 11);
  auto path = std::filesystem::temp_directory_path() / "aquadem_demo_test.txt";
  ds.save(path);
  DemoDataset loaded = DemoDataset::load(path);
  CHECK(loaded.serialize() == ds.serialize());
  std::filesystem::remove(path);
}

TEST_CASE("bang-bang grids have the right sizes and contents") {
  BangBangGenerator bb2(2, 2);
  CHECK(bb2.k() == 4);
  auto cs = bb2.candidates(Vec{0, 0});
  std::set<Vec> actions(cs.actions.begin(), cs.actions.end());
  CHECK(actions == std::set<Vec>{{-1, -1}, {-1, 1}, {1, -1}, {1, 1}});

  BangBangGenerator bb3(3, 2);
  CHECK(bb3.k() == 9);
  bool has_zero = false;
  for (const Vec& a : bb3.candidates(Vec{0, 0}).actions) {
    has_zero |= a == Vec{0.0, 0.0};
  }
  CHECK(has_zero);

  BangBangGenerator bb5(5, 5);
  CHECK(bb5.k() == 3125);

  CHECK_THROWS_AS(BangBangGenerator(5, 9), DomainError);
  CHECK_THROWS_AS(BangBangGenerator(1, 2), DomainError);
}

TEST_CASE("discretized step equals the manual two-stage computation") {
  BangBangGenerator bb(3, 2);
  GridWorld env;
  DiscretizedEnv denv(env, bb);
  Rng rng(17);
  denv.reset(rng);
  for (int i = 0; i < 100; ++i) {
    const Vec state = env.state();
    const int idx = static_cast<int>(rng.uniform_index(denv.k()));
    const Vec action = bb.candidates(state).actions[idx];
    auto expected = env.transition(state, action);
    StepResult got = denv.step(idx);
    CHECK(got.next == expected.next);
    CHECK(got.reward.value() == expected.reward);
    if (got.done) denv.reset(rng);
  }
}

TEST_CASE("discretized env validates the action index") {
  BangBangGenerator bb(2, 2);
  GridWorld env;
  DiscretizedEnv denv(env, bb);
  Rng rng(1);
  denv.reset(rng);
  CHECK_THROWS_AS(denv.step(-1), StructuralError);
  CHECK_THROWS_AS(denv.step(4), StructuralError);
}

TEST_CASE("discrete index rollouts are reproducible from seed") {
  BangBangGenerator bb(2, 2);
  auto run = [&](std::uint64_t seed) {
    GridWorld env;
    DiscretizedEnv denv(env, bb);
    Rng rng(seed);
    denv.reset(rng);
    Vec trail;
    for (int i = 0; i < 50; ++i) {
      StepResult r = denv.step(static_cast<int>(rng.uniform_index(4)));
      trail.insert(trail.end(), r.next.begin(), r.next.end());
      if (r.done) denv.reset(rng);
    }
    return trail;
  };
  CHECK(run(3) == run(3));
}

TEST_CASE("play gridworld rewards only its own task goal") {
  GridWorldConfig cfg;
  PlayGridWorld play(cfg, 3, 0);
  Rng rng(2);
  play.reset(rng);
  // Goal 0 is the top-right corner square.
  CHECK(play.in_goal_region(0, Vec{0.97, 0.97}));
  CHECK(!play.in_goal_region(1, Vec{0.97, 0.97}));

  PlayGridWorld play_free(cfg, 3, -1);
  play_free.reset(rng);
  int steps = 0;
  while (true) {
    StepResult r = play_free.step(Vec{1.0, 1.0});
    ++steps;
    CHECK(r.reward.value() == 0.0);
    if (r.done) break;
  }
  CHECK(steps == cfg.max_steps);
}

TEST_CASE("play demos visit several goals and serialize rewards as null") {
  GridWorldConfig cfg;
  PlayGridWorld env(cfg, 3, -1);
  DemoDataset ds = generate_play_demos(env, 4, 21);
  CHECK(ds.episodes.size() == 4);
  for (const auto& ep : ds.episodes) {
    CHECK(static_cast<int>(ep.size()) == cfg.max_steps);
    for (const auto& st : ep) CHECK(!st.reward.has_value());
  }
  // Direction multimodality: distinct headings must appear.
  std::set<std::pair<int, int>> headings;
  for (const auto& ep : ds.episodes) {
    for (const auto& st : ep) {
      headings.insert({static_cast<int>(std::round(st.action[0] * 4)),
                       static_cast<int>(std::round(st.action[1] * 4))});
    }
  }
  CHECK(headings.size() >= 4);
  const std::string text = ds.serialize();
  CHECK(DemoDataset::deserialize(text).serialize() == text);
}

TEST_CASE("reward channel instrumentation counts reads") {
  GridWorld env;
  Rng rng(6);
  env.reset(rng);
  CHECK(env.reward_reads() == 0);
  StepResult r = env.step(Vec{1.0, 0.0});
  CHECK(env.reward_reads() == 0);
  (void)r.reward.value();
  CHECK(env.reward_reads() == 1);
}

TEST_CASE("generator checkpoints round-trip through the factory") {
  BangBangGenerator bb(3, 2);
  auto path = std::filesystem::temp_directory_path() / "aquadem_bb_test.txt";
  save_generator_file(bb, path);
  auto loaded = load_generator_file(path);
  CHECK(loaded->trait() == "bangbang");
  CHECK(loaded->k() == 9);
  CHECK(loaded->candidates(Vec{0.2, 0.3}).actions ==
        bb.candidates(Vec{0.2, 0.3}).actions);
  std::filesystem::remove(path);
}
