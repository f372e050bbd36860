// dacmdp — compile offline experience datasets into core-state MDPs, solve
// them with sparse value iteration, and evaluate / transform the resulting
// policies. Every subcommand that writes an artifact also writes a
// <out>.manifest.json with the resolved configuration and artifact hashes.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dacmdp/dacmdp.hpp"

using namespace dacmdp;

namespace {

struct CommonOpts {
  DacConfig cfg;
  unsigned threads = 1;
  uint64_t seed = 0;
  std::string format = "jsonl";
};

void add_config_opts(CLI::App* app, CommonOpts& o) {
  app->add_option("--k", o.cfg.k, "smoothing factor (neighbors per compiled row)");
  app->add_option("--kpi", o.cfg.k_pi, "policy smoothing (neighbors per decision)");
  app->add_option("--cost", o.cfg.cost,
                  "cost factor C; rule of thumb: order of magnitude of the observed rewards");
  app->add_option("--gamma", o.cfg.gamma, "discount, in (0,1)");
  app->add_option("--tol", o.cfg.delta_min, "VI convergence threshold (sup-norm residual)");
  app->add_option("--max-iters", o.cfg.max_iters, "VI iteration cap");
  app->add_option("--weighted", o.cfg.weighted, "inverse-distance weighted averaging (1/0)");
  app->add_option("--sknn", o.cfg.sknn, "state-level kNN policy computation (1/0)");
  app->add_option("--threads", o.threads, "worker threads");
  app->add_option("--seed", o.seed, "seed for all randomness in this run");
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  if (out.empty()) throw ConfigError("empty list: " + s);
  return out;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (double v : parse_double_list(s)) out.push_back(int(v));
  return out;
}

std::vector<bool> parse_bool_list(const std::string& s) {
  std::vector<bool> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "1" || item == "on" || item == "true")
      out.push_back(true);
    else if (item == "0" || item == "off" || item == "false")
      out.push_back(false);
    else
      throw ConfigError("expected 1/0/on/off, got '" + item + "'");
  }
  return out;
}

EnvSpec make_env_spec(const std::string& env, const std::string& layout, int horizon, double slip) {
  EnvSpec spec;
  if (env == "cartpole") {
    spec.kind = EnvKind::cartpole;
  } else if (env == "gridworld") {
    spec.kind = EnvKind::gridworld;
    if (layout.empty()) throw ConfigError("gridworld needs --layout (name or map file)");
    spec.layout = layout.find('/') == std::string::npos && layout.find('.') == std::string::npos
                      ? GridLayout::named(layout)
                      : GridLayout::load(layout);
  } else {
    throw ConfigError("unknown --env '" + env + "' (cartpole | gridworld)");
  }
  spec.horizon = horizon;
  spec.slip_prob = slip;
  return spec;
}

std::map<std::string, int> action_names_for(EnvKind kind) {
  if (kind == EnvKind::cartpole) return {{"left", 0}, {"right", 1}};
  return {{"forward", 0}, {"right", 1}, {"left", 2}};
}

ExperienceDataset load_data(const std::string& path, const std::string& format,
                            const std::string& clip) {
  auto ds = load_dataset(path, parse_dataset_format(format));
  if (!clip.empty()) {
    const auto colon = clip.find(':');
    if (colon == std::string::npos) throw ConfigError("--clip expects lo:hi");
    ds = clip_rewards(ds, std::stof(clip.substr(0, colon)), std::stof(clip.substr(colon + 1)));
  }
  return ds;
}

// Q-table persistence: magic "DACQ", u32 version=1, u32 n_states,
// u32 n_actions, f64 V, f64 Q, f64 residual, u32 iterations, u8 converged.
void save_solve_result(const SolveResult& res, uint32_t n_actions, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out.write("DACQ", 4);
  const uint32_t version = 1, n = uint32_t(res.V.size());
  const uint8_t converged = res.converged ? 1 : 0;
  const uint32_t iters = uint32_t(res.iterations);
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&n), 4);
  out.write(reinterpret_cast<const char*>(&n_actions), 4);
  out.write(reinterpret_cast<const char*>(res.V.data()), std::streamsize(res.V.size() * 8));
  out.write(reinterpret_cast<const char*>(res.Q.data()), std::streamsize(res.Q.size() * 8));
  out.write(reinterpret_cast<const char*>(&res.residual), 8);
  out.write(reinterpret_cast<const char*>(&iters), 4);
  out.write(reinterpret_cast<const char*>(&converged), 1);
  if (!out) throw DataError("write failure: " + path);
}

std::string v_hash(const SolveResult& res) {
  return hash_hex(fnv1a64(res.V.data(), res.V.size() * sizeof(double)));
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << text;
  if (!out) throw DataError("write failure: " + path);
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  }
};

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"DAC-MDP toolkit: non-parametric MDPs from offline experience"};
  app.require_subcommand(1);

  CommonOpts gen;
  std::string gen_env = "cartpole", gen_layout, gen_policy = "random", gen_out, gen_clip, gen_repr;
  int gen_steps = 10000, gen_horizon = 0;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate a dataset from a seeded environment");
  gen_cmd->add_option("--env", gen_env, "cartpole | gridworld");
  gen_cmd->add_option("--layout", gen_layout, "gridworld layout name or map file");
  gen_cmd->add_option("--policy", gen_policy, "random | optimal | mixed");
  gen_cmd->add_option("--steps", gen_steps, "number of tuples to collect");
  gen_cmd->add_option("--horizon", gen_horizon, "episode cap (0 = per-env default)");
  gen_cmd->add_option("--seed", gen.seed, "generation seed");
  gen_cmd->add_option("--out", gen_out, "output dataset path")->required();
  gen_cmd->add_option("--format", gen.format, "jsonl | binary");
  gen_cmd->add_option("--clip", gen_clip, "clip rewards to lo:hi (off by default)");
  gen_cmd->add_option("--repr", gen_repr, "embed observations: rnd:<out_dim> (default: identity)");

  CommonOpts comp;
  std::string comp_data, comp_out, comp_clip;
  auto* comp_cmd = app.add_subcommand("compile", "compile a dataset into a core-state MDP");
  comp_cmd->add_option("--data", comp_data, "dataset path")->required();
  comp_cmd->add_option("--format", comp.format, "jsonl | binary");
  comp_cmd->add_option("--clip", comp_clip, "clip rewards to lo:hi (off by default)");
  comp_cmd->add_option("--out", comp_out, "output .dacm path")->required();
  add_config_opts(comp_cmd, comp);

  CommonOpts sol;
  std::string sol_mdp, sol_out;
  auto* sol_cmd = app.add_subcommand("solve", "value-iterate a compiled MDP");
  sol_cmd->add_option("--mdp", sol_mdp, "compiled .dacm path")->required();
  sol_cmd->add_option("--out", sol_out, "output Q-table path (.dacq)")->required();
  add_config_opts(sol_cmd, sol);

  CommonOpts ev;
  std::string ev_data, ev_mdp, ev_env = "cartpole", ev_layout, ev_out, ev_clip;
  int ev_episodes = 50, ev_horizon = 0, ev_ne = 1;
  double ev_eps = 0.0, ev_slip = 0.0;
  auto* ev_cmd =
      app.add_subcommand("eval", "evaluate the greedy/eps-greedy policy in an environment");
  ev_cmd->add_option("--ne", ev_ne,
                     "candidate policies to evaluate and select from (1 = pure offline; "
                     "6 = the k=5, C in {1,100,1e6} x k_pi in {11,51} grid)");
  ev_cmd->add_option("--data", ev_data, "dataset path")->required();
  ev_cmd->add_option("--format", ev.format, "jsonl | binary");
  ev_cmd->add_option("--clip", ev_clip, "clip rewards to lo:hi (off by default)");
  ev_cmd->add_option("--mdp", ev_mdp, "compiled .dacm (default: compile from --data)");
  ev_cmd->add_option("--env", ev_env, "cartpole | gridworld");
  ev_cmd->add_option("--layout", ev_layout, "gridworld layout name or map file");
  ev_cmd->add_option("--episodes", ev_episodes, "evaluation episodes");
  ev_cmd->add_option("--eps", ev_eps, "epsilon for the eps-greedy wrapper");
  ev_cmd->add_option("--horizon", ev_horizon, "episode cap (0 = per-env default)");
  ev_cmd->add_option("--slip", ev_slip, "environment slip probability");
  ev_cmd->add_option("--out", ev_out, "optional JSON results path");
  add_config_opts(ev_cmd, ev);

  CommonOpts wi;
  std::string wi_mdp, wi_out, wi_out_q;
  std::vector<std::string> wi_modifiers;
  std::string wi_env = "cartpole";
  auto* wi_cmd = app.add_subcommand("whatif", "transform a compiled MDP and re-solve");
  wi_cmd->add_option("--mdp", wi_mdp, "compiled .dacm path")->required();
  wi_cmd
      ->add_option("--modifier", wi_modifiers,
                   "action_penalty:<a>:<p> | discount:<gamma> | slip:<rho> (repeatable)")
      ->required();
  wi_cmd->add_option("--env", wi_env, "environment whose action names resolve <a>");
  wi_cmd->add_option("--out", wi_out, "output path for the modified .dacm");
  wi_cmd->add_option("--out-q", wi_out_q, "output path for the re-solved Q table (.dacq)");
  add_config_opts(wi_cmd, wi);

  CommonOpts sw;
  std::vector<std::string> sw_data;
  std::string sw_env = "cartpole", sw_layout, sw_out;
  std::string sw_cost = "1", sw_k = "5", sw_kpi = "11", sw_weighted = "1", sw_sknn = "1",
              sw_eps = "0";
  int sw_episodes = 50, sw_horizon = 0;
  auto* sw_cmd = app.add_subcommand("sweep", "hyperparameter sweep, one CSV row per combination");
  sw_cmd->add_option("--data", sw_data, "dataset path(s)")->required();
  sw_cmd->add_option("--format", sw.format, "jsonl | binary");
  sw_cmd->add_option("--env", sw_env, "cartpole | gridworld");
  sw_cmd->add_option("--layout", sw_layout, "gridworld layout name or map file");
  sw_cmd->add_option("--cost", sw_cost, "C axis, comma-separated");
  sw_cmd->add_option("--k", sw_k, "k axis, comma-separated");
  sw_cmd->add_option("--kpi", sw_kpi, "k_pi axis, comma-separated");
  sw_cmd->add_option("--weighted", sw_weighted, "weighted axis, e.g. 0,1");
  sw_cmd->add_option("--sknn", sw_sknn, "sknn axis, e.g. 0,1");
  sw_cmd->add_option("--eps", sw_eps, "evaluation epsilon list");
  sw_cmd->add_option("--episodes", sw_episodes, "episodes per row");
  sw_cmd->add_option("--horizon", sw_horizon, "episode cap (0 = per-env default)");
  sw_cmd->add_option("--gamma", sw.cfg.gamma, "discount");
  sw_cmd->add_option("--tol", sw.cfg.delta_min, "VI convergence threshold");
  sw_cmd->add_option("--max-iters", sw.cfg.max_iters, "VI iteration cap");
  sw_cmd->add_option("--threads", sw.threads, "worker threads");
  sw_cmd->add_option("--seed", sw.seed, "evaluation seed");
  sw_cmd->add_option("--out", sw_out, "output CSV path")->required();

  CommonOpts ab;
  std::vector<std::string> ab_data;
  std::string ab_env = "cartpole", ab_layout, ab_out, ab_sizes = "0.1,1.0";
  int ab_episodes = 50, ab_horizon = 0;
  auto* ab_cmd = app.add_subcommand("ablate", "WA x sKNN 2x2 ablation across dataset sizes");
  ab_cmd->add_option("--data", ab_data, "dataset path(s)")->required();
  ab_cmd->add_option("--format", ab.format, "jsonl | binary");
  ab_cmd->add_option("--env", ab_env, "cartpole | gridworld");
  ab_cmd->add_option("--layout", ab_layout, "gridworld layout name or map file");
  ab_cmd->add_option("--sizes", ab_sizes, "dataset size fractions, comma-separated");
  ab_cmd->add_option("--episodes", ab_episodes, "episodes per row");
  ab_cmd->add_option("--horizon", ab_horizon, "episode cap (0 = per-env default)");
  ab_cmd->add_option("--out", ab_out, "output CSV path")->required();
  add_config_opts(ab_cmd, ab);

  CommonOpts be;
  std::string be_threads = "1,2,4,8", be_out;
  uint64_t be_states = 1000000;
  int be_actions = 5, be_k = 5;
  auto* be_cmd = app.add_subcommand("bench", "solver scaling benchmark on a synthetic MDP");
  be_cmd->add_option("--states", be_states, "synthetic state count");
  be_cmd->add_option("--actions", be_actions, "synthetic action count");
  be_cmd->add_option("--k", be_k, "successors per row");
  be_cmd->add_option("--threads", be_threads, "thread counts, comma-separated");
  be_cmd->add_option("--gamma", be.cfg.gamma, "discount");
  be_cmd->add_option("--tol", be.cfg.delta_min, "VI convergence threshold");
  be_cmd->add_option("--max-iters", be.cfg.max_iters, "VI iteration cap");
  be_cmd->add_option("--seed", be.seed, "synthetic MDP seed");
  be_cmd->add_option("--out", be_out, "output CSV path")->required();

  CommonOpts in;
  std::string in_data, in_mdp;
  uint64_t in_sample = 0;
  auto* in_cmd = app.add_subcommand("inspect", "print dataset / MDP statistics and coverage");
  in_cmd->add_option("--data", in_data, "dataset path");
  in_cmd->add_option("--mdp", in_mdp, "compiled .dacm path");
  in_cmd->add_option("--sample", in_sample, "coverage query subsample (0 = all source states)");
  add_config_opts(in_cmd, in);
  in_cmd->add_option("--format", in.format, "jsonl | binary");

  try {
    app.parse(argc, argv);

    if (*gen_cmd) {
      Timer timer;
      const auto spec = make_env_spec(gen_env, gen_layout, gen_horizon, 0.0);
      EnvSpec gen_spec = spec;
      if (spec.kind == EnvKind::gridworld) gen_spec.random_spawn_override = true;
      auto ds = generate_dataset(gen_spec, BehaviorPolicy::parse(gen_policy), gen_steps, gen.seed);
      if (!gen_clip.empty()) {
        const auto colon = gen_clip.find(':');
        if (colon == std::string::npos) throw ConfigError("--clip expects lo:hi");
        ds = clip_rewards(ds, std::stof(gen_clip.substr(0, colon)),
                          std::stof(gen_clip.substr(colon + 1)));
        ds.metadata["clip"] = gen_clip;
      }
      if (!gen_repr.empty()) {
        if (gen_repr.rfind("rnd:", 0) != 0) throw ConfigError("--repr expects rnd:<out_dim>");
        const int out_dim = std::stoi(gen_repr.substr(4));
        ds = embed_dataset(ds, Representation::random_projection(ds.state_dim, out_dim, gen.seed));
        ds.metadata["repr"] = gen_repr;
      }
      save_dataset(ds, gen_out, parse_dataset_format(gen.format));
      RunManifest manifest;
      manifest.subcommand = "gen-data";
      manifest.config = {{"env", gen_env},         {"layout", gen_layout}, {"policy", gen_policy},
                         {"steps", gen_steps},     {"seed", gen.seed},     {"format", gen.format},
                         {"horizon", gen_horizon}, {"clip", gen_clip},     {"repr", gen_repr}};
      manifest.add_output(gen_out);
      manifest.wall_time_ms = timer.ms();
      manifest.write(gen_out + ".manifest.json");
      std::printf("wrote %zu tuples (d=%d, |A|=%d) to %s\n", ds.size(), ds.state_dim,
                  ds.action_count, gen_out.c_str());
    }

    if (*comp_cmd) {
      Timer timer;
      comp.cfg.validate();
      const auto ds = load_data(comp_data, comp.format, comp_clip);
      const auto idx = NeighborIndex::build(ds);
      const auto mdp = compile(ds, idx, comp.cfg, resolve_threads(comp.threads));
      save_mdp(mdp, comp_out);
      RunManifest manifest;
      manifest.subcommand = "compile";
      manifest.config = {{"k", comp.cfg.k},
                         {"cost", comp.cfg.cost},
                         {"weighted", comp.cfg.weighted},
                         {"delta_d", comp.cfg.delta_d},
                         {"threads", comp.threads},
                         {"format", comp.format},
                         {"clip", comp_clip}};
      manifest.add_input(comp_data);
      manifest.add_output(comp_out);
      manifest.wall_time_ms = timer.ms();
      manifest.write(comp_out + ".manifest.json");
      std::printf("compiled %u core states x %u actions (k=%u) to %s\n", mdp.n_states,
                  mdp.n_actions, mdp.k, comp_out.c_str());
    }

    if (*sol_cmd) {
      Timer timer;
      sol.cfg.validate();
      const auto mdp = load_mdp(sol_mdp);
      const auto res = solve_parallel(mdp, sol.cfg, resolve_threads(sol.threads));
      save_solve_result(res, mdp.n_actions, sol_out);
      RunManifest manifest;
      manifest.subcommand = "solve";
      manifest.config = {{"gamma", sol.cfg.gamma},
                         {"tol", sol.cfg.delta_min},
                         {"max_iters", sol.cfg.max_iters},
                         {"threads", sol.threads}};
      manifest.add_input(sol_mdp);
      manifest.add_output(sol_out);
      manifest.wall_time_ms = timer.ms();
      manifest.write(sol_out + ".manifest.json");
      std::printf("solved %zu states in %d iterations, residual %.3g, v_hash %s%s\n", res.V.size(),
                  res.iterations, res.residual, v_hash(res).c_str(),
                  res.converged ? "" : " (max-iters cutoff)");
      if (!res.converged) return 1;
    }

    if (*ev_cmd) {
      Timer timer;
      ev.cfg.validate();
      if (ev_ne < 1) throw ConfigError("--ne must be >= 1");
      const auto ds = load_data(ev_data, ev.format, ev_clip);
      const auto env_spec = make_env_spec(ev_env, ev_layout, ev_horizon, ev_slip);
      nlohmann::ordered_json j;

      if (ev_ne > 1) {
        // N_e protocol: evaluate a ladder of candidate configs and pick the
        // best observed one. Candidate order: the flag config, the default
        // 6-point grid, then wider C / k_pi extensions.
        std::vector<DacConfig> candidates{ev.cfg};
        for (const auto& cfg : default_candidate_grid(ev.cfg)) candidates.push_back(cfg);
        for (double C : {0.01, 1e4})
          for (int kpi : {31, 101}) {
            DacConfig cfg = ev.cfg;
            cfg.k = 5;
            cfg.cost = C;
            cfg.k_pi = kpi;
            candidates.push_back(cfg);
          }
        candidates.resize(std::size_t(std::min<int>(ev_ne, int(candidates.size()))));
        const auto report = candidate_policy_search(ds, candidates, env_spec, ev_episodes, ev_eps,
                                                    ev.seed, resolve_threads(ev.threads));
        for (std::size_t i = 0; i < report.candidates.size(); ++i) {
          const auto& c = report.candidates[i];
          std::printf("candidate %zu: k=%d C=%g k_pi=%d -> mean %.4f std %.4f %s%s\n", i, c.cfg.k,
                      c.cfg.cost, c.cfg.k_pi, c.mean_return, c.std_return, c.error.c_str(),
                      int(i) == report.best_index ? "  <- best" : "");
          nlohmann::ordered_json cj{{"k", c.cfg.k},
                                    {"cost", c.cfg.cost},
                                    {"kpi", c.cfg.k_pi},
                                    {"mean_return", c.mean_return},
                                    {"std_return", c.std_return},
                                    {"error", c.error}};
          j["candidates"].push_back(cj);
        }
        if (report.best_index < 0) throw DataError("every candidate failed");
        j["best_index"] = report.best_index;
        j["ne"] = report.n_e;
      } else {
        const auto idx = NeighborIndex::build(ds);
        const CoreMdp mdp = ev_mdp.empty() ? compile(ds, idx, ev.cfg, resolve_threads(ev.threads))
                                           : load_mdp(ev_mdp);
        const auto solve = solve_parallel(mdp, ev.cfg, resolve_threads(ev.threads));
        PolicyHandle handle(ds, idx, mdp, solve, ev.cfg);
        const auto result = evaluate_actor(
            env_spec,
            [&](const Environment&, std::span<const float> obs, SeededRng& rng) {
              return handle.act_eps_greedy(obs, ev_eps, rng);
            },
            ev_episodes, ev.seed, resolve_threads(ev.threads));
        std::printf("mean_return %.4f  std %.4f  episodes %d\n", result.mean_return,
                    result.std_return, ev_episodes);
        j["mean_return"] = result.mean_return;
        j["std_return"] = result.std_return;
        j["per_episode"] = result.per_episode;
      }

      if (!ev_out.empty()) {
        write_text_file(ev_out, j.dump(2) + "\n");
        RunManifest manifest;
        manifest.subcommand = "eval";
        manifest.config = {{"episodes", ev_episodes}, {"eps", ev_eps},
                           {"seed", ev.seed},         {"env", ev_env},
                           {"layout", ev_layout},     {"kpi", ev.cfg.k_pi},
                           {"sknn", ev.cfg.sknn},     {"gamma", ev.cfg.gamma},
                           {"slip", ev_slip},         {"ne", ev_ne}};
        manifest.add_input(ev_data);
        if (!ev_mdp.empty()) manifest.add_input(ev_mdp);
        manifest.add_output(ev_out);
        manifest.wall_time_ms = timer.ms();
        manifest.write(ev_out + ".manifest.json");
      }
    }

    if (*wi_cmd) {
      Timer timer;
      wi.cfg.validate();
      CoreMdp mdp = load_mdp(wi_mdp);
      const auto names =
          action_names_for(wi_env == "cartpole" ? EnvKind::cartpole : EnvKind::gridworld);
      double gamma = wi.cfg.gamma;
      for (const auto& text : wi_modifiers) {
        const auto spec = ModifierSpec::parse(text, names);
        if (spec.kind == ModifierSpec::Kind::discount_override)
          gamma = spec.gamma;
        else
          mdp = apply_modifier(mdp, spec);
      }
      DacConfig solve_cfg = wi.cfg;
      solve_cfg.gamma = gamma;
      const auto res = solve_parallel(mdp, solve_cfg, resolve_threads(wi.threads));
      if (!wi_out.empty()) save_mdp(mdp, wi_out);
      if (!wi_out_q.empty()) save_solve_result(res, mdp.n_actions, wi_out_q);
      RunManifest manifest;
      manifest.subcommand = "whatif";
      manifest.config = {{"modifiers", wi_modifiers},
                         {"gamma", gamma},
                         {"tol", solve_cfg.delta_min},
                         {"threads", wi.threads}};
      manifest.add_input(wi_mdp);
      if (!wi_out.empty()) manifest.add_output(wi_out);
      if (!wi_out_q.empty()) manifest.add_output(wi_out_q);
      manifest.wall_time_ms = timer.ms();
      const std::string anchor = !wi_out.empty() ? wi_out : !wi_out_q.empty() ? wi_out_q : wi_mdp;
      manifest.write(anchor + ".whatif.manifest.json");
      std::printf("applied %zu modifier(s); solved in %d iterations, residual %.3g\n",
                  wi_modifiers.size(), res.iterations, res.residual);
    }

    if (*sw_cmd || *ab_cmd) {
      Timer timer;
      const bool is_sweep = bool(*sw_cmd);
      CommonOpts& o = is_sweep ? sw : ab;
      const auto& paths = is_sweep ? sw_data : ab_data;
      std::vector<ExperienceDataset> datasets;
      std::vector<NamedDataset> named;
      datasets.reserve(paths.size());
      for (const auto& p : paths)
        datasets.push_back(load_dataset(p, parse_dataset_format(o.format)));
      for (std::size_t i = 0; i < paths.size(); ++i) named.push_back({paths[i], &datasets[i]});

      std::vector<SweepRow> rows;
      nlohmann::ordered_json config;
      if (is_sweep) {
        SweepSpec spec;
        spec.datasets = named;
        spec.cost_axis = parse_double_list(sw_cost);
        spec.k_axis = parse_int_list(sw_k);
        spec.kpi_axis = parse_int_list(sw_kpi);
        spec.weighted_axis = parse_bool_list(sw_weighted);
        spec.sknn_axis = parse_bool_list(sw_sknn);
        spec.eps_list = parse_double_list(sw_eps);
        spec.episodes = sw_episodes;
        spec.eval_seed = sw.seed;
        spec.env = make_env_spec(sw_env, sw_layout, sw_horizon, 0.0);
        spec.base = sw.cfg;
        spec.threads = resolve_threads(sw.threads);
        rows = run_sweep(spec);
        config = {{"data", paths},           {"cost", sw_cost},
                  {"k", sw_k},               {"kpi", sw_kpi},
                  {"weighted", sw_weighted}, {"sknn", sw_sknn},
                  {"eps", sw_eps},           {"episodes", sw_episodes},
                  {"seed", sw.seed},         {"env", sw_env},
                  {"layout", sw_layout},     {"gamma", sw.cfg.gamma},
                  {"tol", sw.cfg.delta_min}, {"horizon", sw_horizon}};
      } else {
        AblationSpec spec;
        spec.datasets = named;
        spec.sizes = parse_double_list(ab_sizes);
        spec.env = make_env_spec(ab_env, ab_layout, ab_horizon, 0.0);
        spec.base = ab.cfg;
        spec.episodes = ab_episodes;
        spec.eval_seed = ab.seed;
        spec.threads = resolve_threads(ab.threads);
        rows = run_ablation(spec);
        config = {{"data", paths},           {"sizes", ab_sizes},
                  {"episodes", ab_episodes}, {"seed", ab.seed},
                  {"env", ab_env},           {"layout", ab_layout},
                  {"k", ab.cfg.k},           {"kpi", ab.cfg.k_pi},
                  {"cost", ab.cfg.cost},     {"gamma", ab.cfg.gamma},
                  {"tol", ab.cfg.delta_min}, {"horizon", ab_horizon}};
      }
      const auto& out_path = is_sweep ? sw_out : ab_out;
      write_text_file(out_path, sweep_csv(rows));
      RunManifest manifest;
      manifest.subcommand = is_sweep ? "sweep" : "ablate";
      manifest.config = config;
      for (const auto& p : paths) manifest.add_input(p);
      manifest.add_output(out_path);
      manifest.wall_time_ms = timer.ms();
      manifest.write(out_path + ".manifest.json");
      int failed = 0;
      for (const auto& r : rows) failed += int(!r.error.empty());
      std::printf("%zu rows (%d with recorded errors) -> %s\n", rows.size(), failed,
                  out_path.c_str());
    }

    if (*be_cmd) {
      Timer timer;
      be.cfg.validate();
      const auto mdp =
          make_random_mdp(uint32_t(be_states), uint32_t(be_actions), uint32_t(be_k), be.seed);
      std::ostringstream csv;
      csv << "n_states,n_actions,k,threads,iterations,wall_time_ms,residual,v_hash\n";
      for (int threads : parse_int_list(be_threads)) {
        const auto res = solve_parallel(mdp, be.cfg, unsigned(threads));
        csv << be_states << ',' << be_actions << ',' << be_k << ',' << threads << ','
            << res.iterations << ',' << res.wall_time_ms << ',' << res.residual << ','
            << v_hash(res) << '\n';
        std::printf("threads=%d iters=%d wall=%.0fms residual=%.3g v_hash=%s\n", threads,
                    res.iterations, res.wall_time_ms, res.residual, v_hash(res).c_str());
      }
      write_text_file(be_out, csv.str());
      RunManifest manifest;
      manifest.subcommand = "bench";
      manifest.config = {{"states", be_states},     {"actions", be_actions},
                         {"k", be_k},               {"threads", be_threads},
                         {"gamma", be.cfg.gamma},   {"tol", be.cfg.delta_min},
                         {"seed", be.seed}};
      manifest.add_output(be_out);
      manifest.wall_time_ms = timer.ms();
      manifest.write(be_out + ".manifest.json");
    }

    if (*in_cmd) {
      if (in_data.empty() && in_mdp.empty()) throw ConfigError("inspect needs --data and/or --mdp");
      if (!in_data.empty()) {
        const auto ds = load_dataset(in_data, parse_dataset_format(in.format));
        std::printf("dataset %s: %zu tuples, d=%d, |A|=%d\n", in_data.c_str(), ds.size(),
                    ds.state_dim, ds.action_count);
        float r_lo = ds.tuples[0].reward, r_hi = r_lo;
        std::size_t terminals = 0;
        for (const auto& t : ds.tuples) {
          r_lo = std::min(r_lo, t.reward);
          r_hi = std::max(r_hi, t.reward);
          terminals += t.terminal;
        }
        std::printf("  rewards in [%g, %g], %zu terminal tuples\n", double(r_lo), double(r_hi),
                    terminals);
        for (const auto& [k, v] : ds.metadata)
          std::printf("  metadata %s=%s\n", k.c_str(), v.c_str());
        const auto idx = NeighborIndex::build(ds);
        ExperienceDataset probe = ds;
        if (in_sample > 0 && in_sample < ds.size()) probe.tuples.resize(in_sample);
        const auto cov = coverage_stats(probe, idx, in.cfg, resolve_threads(in.threads));
        std::printf("  coverage (k=%d%s): d_bar_max=%.6g d_bar_mean=%.6g\n", in.cfg.k,
                    in_sample ? ", sampled" : "", cov.d_bar_max, cov.d_bar_mean);
        for (std::size_t a = 0; a < cov.per_action_support.size(); ++a)
          std::printf("  action %zu: %zu tuples\n", a, cov.per_action_support[a]);
      }
      if (!in_mdp.empty()) {
        const auto mdp = load_mdp(in_mdp);
        std::printf("mdp %s: %u states x %u actions, k=%u, d=%d\n", in_mdp.c_str(), mdp.n_states,
                    mdp.n_actions, mdp.k, mdp.state_dim);
        std::printf("  rewards in [%g, %g]\n", mdp.min_reward(), mdp.max_reward());
      }
    }

    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
