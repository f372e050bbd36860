#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace dacmdp {

enum class EnvKind { cartpole, gridworld };

// Plain-text map format: '#' wall, '.' free, 'G' goal (terminal +1),
// 'B' bonus pillar (solid; bumping yields +0.02 and no movement),
// 'H' hazard (passable; any step ending inside costs -10), 'S' fixed start.
struct GridLayout {
  int width = 0;
  int height = 0;
  std::vector<std::string> cells;
  double wall_bump_reward = -1.0;
  double goal_reward = 1.0;
  double bonus_reward = 0.02;
  double hazard_reward = -10.0;
  std::string name = "custom";

  char at(int x, int y) const {
    if (x < 0 || y < 0 || x >= width || y >= height) return '#';
    return cells[y][x];
  }
  bool solid(int x, int y) const {
    const char c = at(x, y);
    return c == '#' || c == 'B';
  }
  bool spawnable(int x, int y) const {
    const char c = at(x, y);
    return c == '.' || c == 'S';
  }
  std::optional<std::pair<int, int>> start_cell() const {
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        if (cells[y][x] == 'S') return std::make_pair(x, y);
    return std::nullopt;
  }
  std::pair<int, int> goal_cell() const {
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        if (cells[y][x] == 'G') return {x, y};
    throw DataError("layout has no goal cell");
  }
  bool hazard_adjacent(int x, int y) const {
    for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}})
      if (at(x + dx, y + dy) == 'H') return true;
    return false;
  }

  void validate() const {
    if (width < 3 || height < 3) throw DataError("layout too small");
    for (const auto& row : cells)
      if (int(row.size()) != width) throw DataError("ragged layout rows");
    int goals = 0;
    bool spawn = false;
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const char c = cells[y][x];
        if (std::string("#.GBHS").find(c) == std::string::npos)
          throw DataError(std::string("unknown layout cell '") + c + "'");
        if (c == 'G') ++goals;
        if (spawnable(x, y)) spawn = true;
      }
    if (goals != 1) throw DataError("layout must contain exactly one goal");
    if (!spawn) throw DataError("layout has no spawnable cell");
  }

  static GridLayout parse(const std::string& text, std::string name = "custom") {
    GridLayout g;
    g.name = std::move(name);
    std::string row;
    for (char c : text + "\n") {
      if (c == '\n') {
        if (!row.empty()) {
          g.cells.push_back(row);
          g.width = std::max(g.width, int(row.size()));
        }
        row.clear();
      } else if (c != '\r') {
        row.push_back(c);
      }
    }
    g.height = int(g.cells.size());
    for (auto& r : g.cells) r.resize(g.width, '#');
    g.validate();
    return g;
  }

  static GridLayout load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open layout file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse(text, path);
  }

  // Case 1: open room with a goal.
  // Case 2: same room plus a bonus pillar worth +0.02 per bump.
  // Case 3: short corridor with a hazard bypass vs a long safe loop.
  static GridLayout named(const std::string& which) {
    if (which == "simple")
      return parse("##########\n"
                   "#........#\n"
                   "#........#\n"
                   "#.......G#\n"
                   "#........#\n"
                   "#........#\n"
                   "##########\n",
                   "simple");
    if (which == "box_and_pillar")
      return parse("##########\n"
                   "#........#\n"
                   "#...B....#\n"
                   "#........#\n"
                   "#.......G#\n"
                   "#........#\n"
                   "##########\n",
                   "box_and_pillar");
    if (which == "tunnel")
      return parse("###############\n"
                   "#.............#\n"
                   "#.###########.#\n"
                   "#S.....H....G.#\n"
                   "######...######\n"
                   "###############\n",
                   "tunnel");
    throw ConfigError("unknown layout '" + which + "' (simple | box_and_pillar | tunnel)");
  }
};

struct EnvSpec {
  EnvKind kind = EnvKind::cartpole;
  GridLayout layout;       // gridworld only
  int horizon = 0;         // 0 -> 200 (cartpole) / 100 (gridworld)
  double slip_prob = 0.0;  // chance an action is replaced by a uniform one
  bool random_spawn_override = false;  // gridworld: ignore 'S', spawn anywhere

  int effective_horizon() const {
    if (horizon > 0) return horizon;
    return kind == EnvKind::cartpole ? 200 : 100;
  }
};

// Seeded, deterministic environment. Episodes end either on genuine
// termination (`terminal`) or on hitting the horizon (`truncated`); only the
// former should be recorded as terminal in datasets.
class Environment {
public:
  // CartPole constants: standard benchmark values (Euler, dt = 0.02,
  // +-12 degree pole limit, +-2.4 cart limit, force 10 N, reward +1/step).
  static constexpr double kGravity = 9.8;
  static constexpr double kMassCart = 1.0;
  static constexpr double kMassPole = 0.1;
  static constexpr double kPoleHalfLength = 0.5;
  static constexpr double kForceMag = 10.0;
  static constexpr double kTau = 0.02;
  static constexpr double kThetaThreshold = 12.0 * M_PI / 180.0;
  static constexpr double kXThreshold = 2.4;

  Environment(const EnvSpec& spec, uint64_t seed) : spec_(spec), rng_(seed) {
    if (spec_.kind == EnvKind::gridworld) spec_.layout.validate();
    if (!(spec_.slip_prob >= 0.0 && spec_.slip_prob <= 1.0))
      throw ConfigError("slip_prob must be in [0, 1]");
  }

  int action_count() const { return spec_.kind == EnvKind::cartpole ? 2 : 3; }
  int observation_dim() const { return 4; }
  const EnvSpec& spec() const { return spec_; }
  int steps() const { return step_count_; }
  bool done() const { return terminal_ || truncated_; }
  bool reached_goal() const { return goal_reached_; }

  std::vector<float> reset(uint64_t seed) {
    rng_ = SeededRng(seed);
    step_count_ = 0;
    terminal_ = truncated_ = goal_reached_ = false;
    if (spec_.kind == EnvKind::cartpole) {
      x_ = rng_.uniform(-0.05, 0.05);
      xdot_ = rng_.uniform(-0.05, 0.05);
      theta_ = rng_.uniform(-0.05, 0.05);
      thetadot_ = rng_.uniform(-0.05, 0.05);
    } else {
      const auto start = spec_.layout.start_cell();
      if (start.has_value() && !spec_.random_spawn_override) {
        gx_ = start->first;
        gy_ = start->second;
      } else {
        std::vector<std::pair<int, int>> free;
        for (int y = 0; y < spec_.layout.height; ++y)
          for (int x = 0; x < spec_.layout.width; ++x)
            if (spec_.layout.spawnable(x, y)) free.emplace_back(x, y);
        const auto [x, y] = free[std::size_t(rng_.uniform_int(int(free.size())))];
        gx_ = x;
        gy_ = y;
      }
      heading_ = rng_.uniform_int(4);
    }
    return observe();
  }

  struct StepResult {
    std::vector<float> observation;
    double reward = 0.0;
    bool terminal = false;
    bool truncated = false;
  };

  StepResult step(int action) {
    if (done()) throw std::logic_error("step() after episode end");
    if (action < 0 || action >= action_count()) throw ConfigError("action out of range");
    if (spec_.slip_prob > 0.0 && rng_.uniform01() < spec_.slip_prob)
      action = rng_.uniform_int(action_count());

    StepResult out;
    ++step_count_;
    if (spec_.kind == EnvKind::cartpole) {
      step_cartpole(action);
      out.reward = 1.0;
      terminal_ = std::abs(x_) > kXThreshold || std::abs(theta_) > kThetaThreshold;
    } else {
      out.reward = step_grid(action);
      terminal_ = goal_reached_;
    }
    truncated_ = !terminal_ && step_count_ >= spec_.effective_horizon();
    out.observation = observe();
    out.terminal = terminal_;
    out.truncated = truncated_;
    return out;
  }

  // Classic inverted-pendulum-on-cart derivatives; exposed so the
  // equilibrium fixed point is testable with zero force.
  static std::array<double, 4> cartpole_derivatives(const std::array<double, 4>& s, double force) {
    const double theta = s[2], thetadot = s[3];
    const double total_mass = kMassCart + kMassPole;
    const double polemass_length = kMassPole * kPoleHalfLength;
    const double cos_t = std::cos(theta), sin_t = std::sin(theta);
    const double temp = (force + polemass_length * thetadot * thetadot * sin_t) / total_mass;
    const double theta_acc = (kGravity * sin_t - cos_t * temp) /
                             (kPoleHalfLength * (4.0 / 3.0 - kMassPole * cos_t * cos_t / total_mass));
    const double x_acc = temp - polemass_length * theta_acc * cos_t / total_mass;
    return {s[1], x_acc, s[3], theta_acc};
  }

  // gridworld pose (x, y, heading), heading 0=N 1=E 2=S 3=W
  std::array<int, 3> grid_pose() const { return {gx_, gy_, heading_}; }

  std::vector<float> observe() const {
    if (spec_.kind == EnvKind::cartpole)
      return {float(x_), float(xdot_), float(theta_), float(thetadot_)};
    static constexpr int dx[4] = {0, 1, 0, -1};
    static constexpr int dy[4] = {-1, 0, 1, 0};
    return {float(gx_) / float(spec_.layout.width - 1), float(gy_) / float(spec_.layout.height - 1),
            float(dx[heading_]), float(dy[heading_])};
  }

private:
  void step_cartpole(int action) {
    const double force = action == 1 ? kForceMag : -kForceMag;
    const auto d = cartpole_derivatives({x_, xdot_, theta_, thetadot_}, force);
    x_ += kTau * d[0];
    xdot_ += kTau * d[1];
    theta_ += kTau * d[2];
    thetadot_ += kTau * d[3];
  }

  double step_grid(int action) {
    static constexpr int dx[4] = {0, 1, 0, -1};
    static constexpr int dy[4] = {-1, 0, 1, 0};
    double reward = 0.0;
    if (action == 1) {  // turn right
      heading_ = (heading_ + 1) % 4;
    } else if (action == 2) {  // turn left
      heading_ = (heading_ + 3) % 4;
    } else {  // forward
      const int nx = gx_ + dx[heading_], ny = gy_ + dy[heading_];
      const char c = spec_.layout.at(nx, ny);
      if (c == '#') {
        reward += spec_.layout.wall_bump_reward;
      } else if (c == 'B') {
        reward += spec_.layout.bonus_reward;
      } else {
        gx_ = nx;
        gy_ = ny;
        if (c == 'G') {
          reward += spec_.layout.goal_reward;
          goal_reached_ = true;
        }
      }
    }
    if (!goal_reached_ && spec_.layout.at(gx_, gy_) == 'H') reward += spec_.layout.hazard_reward;
    return reward;
  }

  EnvSpec spec_;
  SeededRng rng_;
  int step_count_ = 0;
  bool terminal_ = false, truncated_ = false, goal_reached_ = false;
  // cartpole
  double x_ = 0, xdot_ = 0, theta_ = 0, thetadot_ = 0;
  // gridworld
  int gx_ = 0, gy_ = 0, heading_ = 0;
};

// ---------------------------------------------------------------------------
// Behavior policies for dataset generation
// ---------------------------------------------------------------------------

// Pole-angle/velocity feedback rule with a weak cart-recentering term; a
// near-optimal stand-in for a trained controller.
inline int scripted_cartpole_action(std::span<const float> obs) {
  const double score = 0.06 * obs[0] + 0.18 * obs[1] + 1.0 * obs[2] + 0.45 * obs[3];
  return score > 0.0 ? 1 : 0;
}

// Shortest-path controller over the layout. Hazards and solid cells are
// avoided; heading mismatches resolve with the cheaper turn (right on ties).
class GridPlanner {
public:
  explicit GridPlanner(const GridLayout& layout) : layout_(layout) {
    dist_.assign(std::size_t(layout.width) * layout.height, -1);
    const auto [gx, gy] = layout.goal_cell();
    std::deque<std::pair<int, int>> queue{{gx, gy}};
    dist_at(gx, gy) = 0;
    while (!queue.empty()) {
      const auto [x, y] = queue.front();
      queue.pop_front();
      for (auto [dx, dy] : {std::pair{0, -1}, {0, 1}, {1, 0}, {-1, 0}}) {
        const int nx = x + dx, ny = y + dy;
        if (layout.solid(nx, ny) || layout.at(nx, ny) == 'H') continue;
        if (dist_at(nx, ny) >= 0) continue;
        dist_at(nx, ny) = dist_at(x, y) + 1;
        queue.emplace_back(nx, ny);
      }
    }
  }

  int act(const std::array<int, 3>& pose, SeededRng& rng) const {
    static constexpr int dx[4] = {0, 1, 0, -1};
    static constexpr int dy[4] = {-1, 0, 1, 0};
    const auto [x, y, heading] = pose;
    if (dist_at(x, y) < 0) return rng.uniform_int(3);  // goal unreachable: wander
    int best_heading = -1, best_dist = dist_at(x, y);
    for (int h = 0; h < 4; ++h) {
      const int nx = x + dx[h], ny = y + dy[h];
      if (layout_.solid(nx, ny) || layout_.at(nx, ny) == 'H') continue;
      if (dist_at(nx, ny) >= 0 && dist_at(nx, ny) < best_dist) {
        best_dist = dist_at(nx, ny);
        best_heading = h;
      }
    }
    if (best_heading < 0 || best_heading == heading) return 0;  // forward
    const int diff = (best_heading - heading + 4) % 4;
    return diff == 3 ? 2 : 1;  // 3 = one left turn; otherwise turn right
  }

private:
  int& dist_at(int x, int y) { return dist_[std::size_t(y) * layout_.width + x]; }
  int dist_at(int x, int y) const { return dist_[std::size_t(y) * layout_.width + x]; }
  GridLayout layout_;
  std::vector<int> dist_;
};

struct BehaviorPolicy {
  enum class Kind { random, scripted_optimal, epsilon_mixture };
  Kind kind = Kind::random;
  std::vector<double> eps_list = {0.0, 0.1, 0.2, 0.4, 0.6, 1.0};

  static BehaviorPolicy random() { return {Kind::random, {}}; }
  static BehaviorPolicy scripted_optimal() { return {Kind::scripted_optimal, {}}; }
  static BehaviorPolicy epsilon_mixture(std::vector<double> eps) {
    return {Kind::epsilon_mixture, std::move(eps)};
  }
  std::string to_string() const {
    switch (kind) {
      case Kind::random: return "random";
      case Kind::scripted_optimal: return "scripted-optimal";
      case Kind::epsilon_mixture: return "epsilon-mixture";
    }
    return "?";
  }
  static BehaviorPolicy parse(const std::string& s) {
    if (s == "random") return random();
    if (s == "optimal" || s == "scripted-optimal") return scripted_optimal();
    if (s == "mixed" || s == "epsilon-mixture") return epsilon_mixture({0.0, 0.1, 0.2, 0.4, 0.6, 1.0});
    throw ConfigError("unknown behavior policy '" + s + "' (random | optimal | mixed)");
  }
};

// Rolls episodes (restarting on termination or truncation) until exactly
// `steps` tuples are collected. A pure function of (spec, policy, steps,
// seed). Epsilon-mixture draws one epsilon per episode from eps_list.
inline ExperienceDataset generate_dataset(const EnvSpec& spec, const BehaviorPolicy& policy,
                                          int steps, uint64_t seed) {
  if (steps < 1) throw ConfigError("steps must be >= 1");
  Environment env(spec, seed);
  std::optional<GridPlanner> planner;
  if (spec.kind == EnvKind::gridworld &&
      (policy.kind == BehaviorPolicy::Kind::scripted_optimal ||
       policy.kind == BehaviorPolicy::Kind::epsilon_mixture))
    planner.emplace(spec.layout);

  SeededRng policy_rng(mix_seed(seed, 0xac7104));
  ExperienceDataset ds;
  ds.action_count = env.action_count();
  ds.state_dim = env.observation_dim();
  ds.tuples.reserve(std::size_t(steps));

  uint64_t episode = 0;
  double episode_eps = 0.0;
  std::vector<float> obs;
  auto begin_episode = [&] {
    obs = env.reset(mix_seed(seed, episode));
    if (policy.kind == BehaviorPolicy::Kind::epsilon_mixture)
      episode_eps = policy.eps_list[std::size_t(policy_rng.uniform_int(int(policy.eps_list.size())))];
    ++episode;
  };
  auto scripted = [&](std::span<const float> o) {
    return spec.kind == EnvKind::cartpole ? scripted_cartpole_action(o)
                                          : planner->act(env.grid_pose(), policy_rng);
  };

  begin_episode();
  while (int(ds.tuples.size()) < steps) {
    int action = 0;
    switch (policy.kind) {
      case BehaviorPolicy::Kind::random:
        action = policy_rng.uniform_int(env.action_count());
        break;
      case BehaviorPolicy::Kind::scripted_optimal:
        action = scripted(obs);
        break;
      case BehaviorPolicy::Kind::epsilon_mixture:
        action = policy_rng.uniform01() < episode_eps ? policy_rng.uniform_int(env.action_count())
                                                      : scripted(obs);
        break;
    }
    const auto result = env.step(action);
    ds.tuples.push_back({obs, action, float(result.reward), result.observation, result.terminal});
    obs = result.observation;
    if (result.terminal || result.truncated) begin_episode();
  }
  ds.metadata["env"] = spec.kind == EnvKind::cartpole ? "cartpole" : "gridworld:" + spec.layout.name;
  ds.metadata["policy"] = policy.to_string();
  ds.metadata["seed"] = std::to_string(seed);
  ds.metadata["steps"] = std::to_string(steps);
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// Policy evaluation
// ---------------------------------------------------------------------------

using Actor = std::function<int(const Environment&, std::span<const float>, SeededRng&)>;

struct EvalResult {
  double mean_return = 0.0;
  double std_return = 0.0;
  std::vector<double> per_episode;
};

struct RolloutTrace {
  double total_return = 0.0;
  int steps = 0;
  bool reached_goal = false;
  std::vector<int> actions;
  std::vector<std::array<int, 3>> poses;  // gridworld only
};

inline RolloutTrace rollout_traced(const EnvSpec& spec, const Actor& actor, uint64_t seed) {
  Environment env(spec, seed);
  SeededRng actor_rng(mix_seed(seed, 0x01dca11));
  std::vector<float> obs = env.reset(mix_seed(seed, 0));
  RolloutTrace trace;
  while (!env.done()) {
    const int action = actor(env, obs, actor_rng);
    const auto result = env.step(action);
    trace.total_return += result.reward;
    trace.actions.push_back(action);
    if (spec.kind == EnvKind::gridworld) trace.poses.push_back(env.grid_pose());
    obs = result.observation;
  }
  trace.steps = env.steps();
  trace.reached_goal = env.reached_goal();
  return trace;
}

// Seeded rollouts; episode e always uses the seed stream mix(seed, e), so two
// evaluations with the same seed are paired episode-for-episode.
inline EvalResult evaluate_actor(const EnvSpec& spec, const Actor& actor, int episodes,
                                 uint64_t seed, unsigned threads = 1) {
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
  EvalResult res;
  res.per_episode.resize(std::size_t(episodes));
  parallel_for_blocks(std::size_t(episodes), threads, [&](std::size_t b, std::size_t e, unsigned) {
    for (std::size_t ep = b; ep < e; ++ep)
      res.per_episode[ep] = rollout_traced(spec, actor, mix_seed(seed, ep)).total_return;
  });
  double sum = 0.0;
  for (double r : res.per_episode) sum += r;
  res.mean_return = sum / episodes;
  double var = 0.0;
  for (double r : res.per_episode) var += (r - res.mean_return) * (r - res.mean_return);
  res.std_return = episodes > 1 ? std::sqrt(var / (episodes - 1)) : 0.0;
  return res;
}

} // namespace dacmdp
