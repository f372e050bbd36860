#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "dacmdp/envs.hpp"

using namespace dacmdp;

TEST_CASE("reset is deterministic in the seed; cartpole observes 4 dims") {
  EnvSpec spec;
  spec.kind = EnvKind::cartpole;
  Environment a(spec, 0), b(spec, 0);
  CHECK(a.reset(42) == b.reset(42));
  CHECK(a.reset(42) != a.reset(43));
  CHECK(int(a.reset(1).size()) == 4);
}

TEST_CASE("cartpole dynamics: zero force at the origin is a fixed point") {
  const auto d = Environment::cartpole_derivatives({0, 0, 0, 0}, 0.0);
  for (double v : d) CHECK(v == 0.0);
}

TEST_CASE("cartpole terminates when the pole passes the angle threshold") {
  EnvSpec spec;
  spec.kind = EnvKind::cartpole;
  Environment env(spec, 0);
  env.reset(3);
  int steps = 0;
  bool terminal = false;
  while (!env.done()) {
    const auto out = env.step(0);  // constant push left tips the pole quickly
    terminal = out.terminal;
    ++steps;
  }
  CHECK(terminal);
  CHECK(steps < 200);
  CHECK_THROWS_AS(env.step(0), std::logic_error);
}

TEST_CASE("cartpole horizon ends episodes as truncation, not termination") {
  EnvSpec spec;
  spec.kind = EnvKind::cartpole;
  spec.horizon = 25;
  Environment env(spec, 0);
  env.reset(11);
  Environment::StepResult last;
  while (!env.done()) last = env.step(scripted_cartpole_action(env.observe()));
  CHECK(env.steps() == 25);
  CHECK(last.truncated);
  CHECK_FALSE(last.terminal);
}

TEST_CASE("grid: forward into a wall keeps position and pays the bump reward") {
  EnvSpec spec;
  spec.kind = EnvKind::gridworld;
  spec.layout = GridLayout::parse("#####\n#S#G#\n#####", "boxed");
  Environment env(spec, 0);
  env.reset(5);
  const auto pose = env.grid_pose();
  const auto out = env.step(0);
  CHECK(out.reward == -1.0);
  CHECK(env.grid_pose() == pose);
}

TEST_CASE("grid: turns rotate the heading in place") {
  EnvSpec spec;
  spec.kind = EnvKind::gridworld;
  spec.layout = GridLayout::named("simple");
  Environment env(spec, 0);
  env.reset(9);
  const auto [x0, y0, h0] = env.grid_pose();
  env.step(1);
  auto [x1, y1, h1] = env.grid_pose();
  CHECK(x1 == x0);
  CHECK(y1 == y0);
  CHECK(h1 == (h0 + 1) % 4);
  env.step(2);
  auto [x2, y2, h2] = env.grid_pose();
  CHECK(h2 == h0);
}

TEST_CASE("grid: reaching the goal terminates with +1") {
  EnvSpec spec;
  spec.kind = EnvKind::gridworld;
  spec.layout = GridLayout::parse("#####\n#S.G#\n#####", "corridor");
  Environment env(spec, 0);
  env.reset(2);
  // face east then walk two cells
  while (env.grid_pose()[2] != 1) env.step(1);
  double reward = 0.0;
  auto r1 = env.step(0);
  reward = r1.reward;
  if (!r1.terminal) reward = env.step(0).reward;
  CHECK(reward == 1.0);
  CHECK(env.done());
  CHECK(env.reached_goal());
}

TEST_CASE("grid: bonus pillar is solid and pays per bump; hazard is passable and charges") {
  EnvSpec spec;
  spec.kind = EnvKind::gridworld;
  spec.layout = GridLayout::parse("######\n#SBH.#\n#...G#\n######", "mech");
  Environment env(spec, 0);
  env.reset(4);
  while (env.grid_pose()[2] != 1) env.step(1);  // face east toward the pillar
  const auto bump = env.step(0);
  CHECK(bump.reward == doctest::Approx(0.02));
  CHECK(env.grid_pose()[0] == 1);  // did not move
  const auto bump2 = env.step(0);
  CHECK(bump2.reward == doctest::Approx(0.02));  // repeatable (farmable)
}

TEST_CASE("grid: stepping into a hazard charges -10 and charges while inside") {
  EnvSpec spec;
  spec.kind = EnvKind::gridworld;
  spec.layout = GridLayout::parse("#####\n#SH.#\n#..G#\n#####", "hz");
  Environment env(spec, 0);
  env.reset(4);
  while (env.grid_pose()[2] != 1) env.step(1);
  const auto enter = env.step(0);
  CHECK(enter.reward == doctest::Approx(-10.0));
  CHECK(env.grid_pose()[0] == 2);  // moved inside
  const auto turn_inside = env.step(1);
  CHECK(turn_inside.reward == doctest::Approx(-10.0));
}

TEST_CASE("grid: the agent never occupies a solid cell under random play") {
  EnvSpec spec;
  spec.kind = EnvKind::gridworld;
  spec.layout = GridLayout::named("box_and_pillar");
  SeededRng rng(1);
  for (uint64_t ep = 0; ep < 20; ++ep) {
    Environment env(spec, 0);
    env.reset(mix_seed(77, ep));
    while (!env.done()) {
      env.step(rng.uniform_int(3));
      const auto [x, y, h] = env.grid_pose();
      CHECK_FALSE(spec.layout.solid(x, y));
    }
  }
}

TEST_CASE("grid observation is the normalized pose with a unit heading vector") {
  EnvSpec spec;
  spec.kind = EnvKind::gridworld;
  spec.layout = GridLayout::named("simple");
  Environment env(spec, 0);
  const auto obs = env.reset(6);
  REQUIRE(obs.size() == 4);
  const auto [x, y, h] = env.grid_pose();
  CHECK(obs[0] == doctest::Approx(double(x) / (spec.layout.width - 1)));
  CHECK(obs[1] == doctest::Approx(double(y) / (spec.layout.height - 1)));
  CHECK(std::abs(obs[2]) + std::abs(obs[3]) == doctest::Approx(1.0));
}

TEST_CASE("an always-bumping policy earns exactly -1 per step") {
  EnvSpec spec;
  spec.kind = EnvKind::gridworld;
  spec.layout = GridLayout::parse("#####\n#S#G#\n#####", "boxed");
  spec.horizon = 10;
  const auto res = evaluate_actor(
      spec, [](const Environment&, std::span<const float>, SeededRng&) { return 0; }, 8, 123);
  CHECK(res.mean_return == -10.0);
  CHECK(res.std_return == 0.0);
}

TEST_CASE("evaluation is deterministic and pairs episodes by seed") {
  EnvSpec spec;
  spec.kind = EnvKind::cartpole;
  const Actor random_actor = [](const Environment& env, std::span<const float>, SeededRng& rng) {
    return rng.uniform_int(env.action_count());
  };
  const auto a = evaluate_actor(spec, random_actor, 30, 99, 1);
  const auto b = evaluate_actor(spec, random_actor, 30, 99, 2);  // thread count must not matter
  CHECK(a.per_episode == b.per_episode);
  CHECK(a.mean_return == b.mean_return);
}

TEST_CASE("scripted cartpole controller far outperforms random") {
  EnvSpec spec;
  spec.kind = EnvKind::cartpole;
  const auto scripted = evaluate_actor(
      spec,
      [](const Environment&, std::span<const float> o, SeededRng&) {
        return scripted_cartpole_action(o);
      },
      50, 4242);
  const auto random = evaluate_actor(
      spec,
      [](const Environment& env, std::span<const float>, SeededRng& rng) {
        return rng.uniform_int(env.action_count());
      },
      50, 4242);
  CHECK(scripted.mean_return >= 195.0);
  CHECK(random.mean_return < scripted.mean_return / 3.0);
}

TEST_CASE("grid planner walks the simple room to the goal from anywhere") {
  EnvSpec spec;
  spec.kind = EnvKind::gridworld;
  spec.layout = GridLayout::named("simple");
  const GridPlanner planner(spec.layout);
  int goals = 0;
  for (uint64_t ep = 0; ep < 25; ++ep) {
    const auto trace = rollout_traced(
        spec,
        [&](const Environment& env, std::span<const float>, SeededRng& rng) {
          return planner.act(env.grid_pose(), rng);
        },
        mix_seed(31, ep));
    goals += int(trace.reached_goal);
  }
  CHECK(goals == 25);
}

TEST_CASE("slip replaces actions randomly but reproducibly") {
  EnvSpec spec;
  spec.kind = EnvKind::gridworld;
  spec.layout = GridLayout::named("simple");
  spec.slip_prob = 0.5;
  const Actor forward = [](const Environment&, std::span<const float>, SeededRng&) { return 0; };
  const auto a = rollout_traced(spec, forward, 8);
  const auto b = rollout_traced(spec, forward, 8);
  CHECK(a.poses == b.poses);

  EnvSpec no_slip = spec;
  no_slip.slip_prob = 0.0;
  const auto c = rollout_traced(no_slip, forward, 8);
  CHECK(a.poses != c.poses);
}

TEST_CASE("random_spawn_override ignores the fixed start cell") {
  EnvSpec spec;
  spec.kind = EnvKind::gridworld;
  spec.layout = GridLayout::named("tunnel");
  const auto start = spec.layout.start_cell();
  REQUIRE(start.has_value());
  Environment fixed(spec, 0);
  for (uint64_t s = 0; s < 5; ++s) {
    fixed.reset(s);
    CHECK(fixed.grid_pose()[0] == start->first);
    CHECK(fixed.grid_pose()[1] == start->second);
  }
  spec.random_spawn_override = true;
  Environment roaming(spec, 0);
  std::set<std::pair<int, int>> cells;
  for (uint64_t s = 0; s < 40; ++s) {
    roaming.reset(s);
    cells.insert({roaming.grid_pose()[0], roaming.grid_pose()[1]});
  }
  CHECK(cells.size() > 3);
}

TEST_CASE("layout parser validates its cells") {
  CHECK_THROWS_AS(GridLayout::parse("###\n#S#\n###"), DataError);          // no goal
  CHECK_THROWS_AS(GridLayout::parse("####\n#SX#\n#G##\n####"), DataError); // unknown cell
  CHECK_THROWS_AS(GridLayout::named("nope"), ConfigError);
  const auto g = GridLayout::named("tunnel");
  CHECK(g.at(0, 0) == '#');
  CHECK(g.goal_cell().first > 0);
}

TEST_CASE("layouts load from plain-text map files") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "dacmdp_tests";
  fs::create_directories(dir);
  const auto path = dir / "room.txt";
  {
    std::ofstream out(path);
    out << "######\n#S..G#\n#.BH.#\n######\n";
  }
  const auto layout = GridLayout::load(path.string());
  CHECK(layout.width == 6);
  CHECK(layout.height == 4);
  CHECK(layout.at(1, 1) == 'S');
  CHECK(layout.goal_cell() == std::pair<int, int>{4, 1});
  CHECK_THROWS_AS(GridLayout::load((dir / "missing.txt").string()), DataError);
}
