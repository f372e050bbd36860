#pragma once

#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "compiler.hpp"
#include "envs.hpp"
#include "errors.hpp"
#include "knn.hpp"
#include "policy.hpp"
#include "solver.hpp"

namespace dacmdp {

struct NamedDataset {
  std::string name;
  const ExperienceDataset* data = nullptr;
};

struct SweepSpec {
  std::vector<NamedDataset> datasets;
  std::vector<double> cost_axis{1.0};
  std::vector<int> k_axis{5};
  std::vector<int> kpi_axis{11};
  std::vector<bool> weighted_axis{true};
  std::vector<bool> sknn_axis{true};
  std::vector<double> eps_list{0.0};
  int episodes = 50;
  uint64_t eval_seed = 0;
  EnvSpec env;
  DacConfig base;
  unsigned threads = 1;
  std::function<void(const SolveResult&)> on_solve;  // optional observer
};

struct SweepRow {
  std::string dataset;
  double C = 0.0;
  int k = 0;
  int k_pi = 0;
  bool weighted = false;
  bool sknn = false;
  double eps = 0.0;
  double mean_return = 0.0;
  double std_return = 0.0;
  int solve_iters = 0;
  double wall_time_ms = 0.0;
  std::string error;

  bool operator==(const SweepRow&) const = default;
};

namespace detail {

// Memoized pipeline stages so C / weighted / k_pi / sknn / eps axis values
// share kNN work. Failures are memoized too and reproduced into every
// dependent row instead of aborting the sweep.
struct SweepPipeline {
  const SweepSpec& spec;
  std::map<std::string, std::shared_ptr<NeighborIndex>> index_memo;
  std::map<std::string, std::string> index_error;
  std::map<std::pair<std::string, int>, std::shared_ptr<CompileCache>> cache_memo;
  std::map<std::pair<std::string, int>, std::string> cache_error;
  struct Solved {
    std::shared_ptr<CoreMdp> mdp;
    std::shared_ptr<SolveResult> solve;
  };
  std::map<std::tuple<std::string, int, double, bool>, Solved> solve_memo;
  std::map<std::tuple<std::string, int, double, bool>, std::string> solve_error;

  explicit SweepPipeline(const SweepSpec& s) : spec(s) {}

  const NeighborIndex* index_for(const NamedDataset& ds, std::string& err) {
    if (auto it = index_error.find(ds.name); it != index_error.end()) {
      err = it->second;
      return nullptr;
    }
    if (auto it = index_memo.find(ds.name); it != index_memo.end()) return it->second.get();
    try {
      auto idx = std::make_shared<NeighborIndex>(NeighborIndex::build(*ds.data));
      index_memo[ds.name] = idx;
      return idx.get();
    } catch (const std::exception& e) {
      index_error[ds.name] = e.what();
      err = e.what();
      return nullptr;
    }
  }

  const CompileCache* cache_for(const NamedDataset& ds, int k, std::string& err) {
    const auto key = std::make_pair(ds.name, k);
    if (auto it = cache_error.find(key); it != cache_error.end()) {
      err = it->second;
      return nullptr;
    }
    if (auto it = cache_memo.find(key); it != cache_memo.end()) return it->second.get();
    const NeighborIndex* idx = index_for(ds, err);
    if (!idx) return nullptr;
    try {
      auto cache = std::make_shared<CompileCache>(build_compile_cache(*ds.data, *idx, k, spec.threads));
      cache_memo[key] = cache;
      return cache.get();
    } catch (const std::exception& e) {
      cache_error[key] = e.what();
      err = e.what();
      return nullptr;
    }
  }

  const Solved* solved_for(const NamedDataset& ds, int k, double C, bool weighted, std::string& err) {
    const auto key = std::make_tuple(ds.name, k, C, weighted);
    if (auto it = solve_error.find(key); it != solve_error.end()) {
      err = it->second;
      return nullptr;
    }
    if (auto it = solve_memo.find(key); it != solve_memo.end()) return &it->second;
    const CompileCache* cache = cache_for(ds, k, err);
    if (!cache) return nullptr;
    try {
      DacConfig cfg = spec.base;
      cfg.k = k;
      cfg.cost = C;
      cfg.weighted = weighted;
      auto mdp = std::make_shared<CoreMdp>(compile_from_cache(*cache, cfg));
      auto solve = std::make_shared<SolveResult>(solve_parallel(*mdp, cfg, spec.threads));
      if (spec.on_solve) spec.on_solve(*solve);
      auto [it, _] = solve_memo.emplace(key, Solved{std::move(mdp), std::move(solve)});
      return &it->second;
    } catch (const std::exception& e) {
      solve_error[key] = e.what();
      err = e.what();
      return nullptr;
    }
  }
};

} // namespace detail

// Full cross-product sweep. Rows are independent: each is computed from the
// same memoized stages regardless of which other axis values are present.
inline std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
  if (spec.datasets.empty()) throw ConfigError("sweep needs at least one dataset");
  detail::SweepPipeline pipe(spec);
  std::vector<SweepRow> rows;
  for (const auto& ds : spec.datasets)
    for (int k : spec.k_axis)
      for (double C : spec.cost_axis)
        for (bool weighted : spec.weighted_axis)
          for (int k_pi : spec.kpi_axis)
            for (bool sknn : spec.sknn_axis)
              for (double eps : spec.eps_list) {
                SweepRow row;
                row.dataset = ds.name;
                row.C = C;
                row.k = k;
                row.k_pi = k_pi;
                row.weighted = weighted;
                row.sknn = sknn;
                row.eps = eps;
                std::string err;
                const auto* solved = pipe.solved_for(ds, k, C, weighted, err);
                if (!solved) {
                  row.error = err;
                  rows.push_back(std::move(row));
                  continue;
                }
                try {
                  DacConfig cfg = spec.base;
                  cfg.k = k;
                  cfg.cost = C;
                  cfg.weighted = weighted;
                  cfg.k_pi = k_pi;
                  cfg.sknn = sknn;
                  const NeighborIndex* idx = pipe.index_memo.at(ds.name).get();
                  PolicyHandle handle(*ds.data, *idx, *solved->mdp, *solved->solve, cfg);
                  const EvalResult ev = evaluate_actor(
                      spec.env,
                      [&](const Environment&, std::span<const float> obs, SeededRng& rng) {
                        return handle.act_eps_greedy(obs, eps, rng);
                      },
                      spec.episodes, spec.eval_seed, spec.threads);
                  row.mean_return = ev.mean_return;
                  row.std_return = ev.std_return;
                  row.solve_iters = solved->solve->iterations;
                  row.wall_time_ms = solved->solve->wall_time_ms;
                } catch (const std::exception& e) {
                  row.error = e.what();
                }
                rows.push_back(std::move(row));
              }
  return rows;
}

// First round(frac * N) tuples; trajectory prefixes, matching how a smaller
// collection run would have looked.
inline ExperienceDataset prefix_subset(const ExperienceDataset& ds, double frac) {
  if (!(frac > 0.0 && frac <= 1.0)) throw ConfigError("subset fraction must be in (0, 1]");
  ExperienceDataset out;
  out.action_count = ds.action_count;
  out.state_dim = ds.state_dim;
  out.metadata = ds.metadata;
  const std::size_t n = std::max<std::size_t>(1, std::size_t(frac * double(ds.size()) + 0.5));
  out.tuples.assign(ds.tuples.begin(), ds.tuples.begin() + std::ptrdiff_t(std::min(n, ds.size())));
  return out;
}

struct AblationSpec {
  std::vector<NamedDataset> datasets;
  std::vector<double> sizes{0.1, 1.0};
  EnvSpec env;
  DacConfig base;
  int episodes = 50;
  uint64_t eval_seed = 0;
  unsigned threads = 1;
  std::function<void(const SolveResult&)> on_solve;
};

// Weighted-averaging x state-kNN 2x2 grid across dataset sizes.
inline std::vector<SweepRow> run_ablation(const AblationSpec& spec) {
  std::vector<SweepRow> rows;
  for (const auto& ds : spec.datasets) {
    std::vector<ExperienceDataset> subsets;
    subsets.reserve(spec.sizes.size());
    for (double frac : spec.sizes) subsets.push_back(prefix_subset(*ds.data, frac));
    SweepSpec sw;
    sw.env = spec.env;
    sw.base = spec.base;
    sw.episodes = spec.episodes;
    sw.eval_seed = spec.eval_seed;
    sw.threads = spec.threads;
    sw.on_solve = spec.on_solve;
    sw.cost_axis = {spec.base.cost};
    sw.k_axis = {spec.base.k};
    sw.kpi_axis = {spec.base.k_pi};
    sw.weighted_axis = {true, false};
    sw.sknn_axis = {true, false};
    for (std::size_t i = 0; i < spec.sizes.size(); ++i) {
      char label[64];
      std::snprintf(label, sizeof(label), "%s@%g%%", ds.name.c_str(), spec.sizes[i] * 100.0);
      sw.datasets.push_back({label, &subsets[i]});
    }
    auto part = run_sweep(sw);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

struct CandidateResult {
  DacConfig cfg;
  double mean_return = 0.0;
  double std_return = 0.0;
  std::string error;
};

struct CandidateReport {
  std::vector<CandidateResult> candidates;
  int best_index = -1;
  int n_e = 0;
};

// The N_e protocol: compile/solve/evaluate each candidate config (sharing
// neighbor caches across candidates with equal k) and pick the best observed
// mean return. Failing candidates are recorded and excluded from the argmax.
inline CandidateReport candidate_policy_search(
    const ExperienceDataset& ds, const std::vector<DacConfig>& cfgs, const EnvSpec& env,
    int episodes, double eps, uint64_t seed, unsigned threads = 1,
    const std::function<void(const SolveResult&)>& on_solve = {}) {
  if (cfgs.empty()) throw ConfigError("candidate_policy_search needs N_e >= 1 configs");
  CandidateReport report;
  report.n_e = int(cfgs.size());
  const NeighborIndex idx = NeighborIndex::build(ds);
  std::map<int, CompileCache> caches;
  for (const auto& cfg : cfgs) {
    CandidateResult res;
    res.cfg = cfg;
    try {
      cfg.validate();
      auto it = caches.find(cfg.k);
      if (it == caches.end())
        it = caches.emplace(cfg.k, build_compile_cache(ds, idx, cfg.k, threads)).first;
      const CoreMdp mdp = compile_from_cache(it->second, cfg);
      const SolveResult solve = solve_parallel(mdp, cfg, threads);
      if (on_solve) on_solve(solve);
      PolicyHandle handle(ds, idx, mdp, solve, cfg);
      const EvalResult ev = evaluate_actor(
          env,
          [&](const Environment&, std::span<const float> obs, SeededRng& rng) {
            return handle.act_eps_greedy(obs, eps, rng);
          },
          episodes, seed, threads);
      res.mean_return = ev.mean_return;
      res.std_return = ev.std_return;
    } catch (const std::exception& e) {
      res.error = e.what();
    }
    report.candidates.push_back(std::move(res));
  }
  for (std::size_t i = 0; i < report.candidates.size(); ++i) {
    if (!report.candidates[i].error.empty()) continue;
    if (report.best_index < 0 ||
        report.candidates[i].mean_return > report.candidates[std::size_t(report.best_index)].mean_return)
      report.best_index = int(i);
  }
  return report;
}

// k=5, C in {1, 100, 1e6} x k_pi in {11, 51}: the N_e = 6 grid.
inline std::vector<DacConfig> default_candidate_grid(DacConfig base) {
  std::vector<DacConfig> grid;
  base.k = 5;
  for (double C : {1.0, 100.0, 1e6})
    for (int kpi : {11, 51}) {
      DacConfig cfg = base;
      cfg.cost = C;
      cfg.k_pi = kpi;
      grid.push_back(cfg);
    }
  return grid;
}

// ---------------------------------------------------------------------------
// CSV emission / parsing (round-trips exactly)
// ---------------------------------------------------------------------------

namespace detail {

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

} // namespace detail

inline const char* sweep_csv_header() {
  return "dataset,C,k,k_pi,weighted,sknn,eps,mean_return,std,solve_iters,wall_time,error";
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << sweep_csv_header() << '\n';
  for (const auto& r : rows)
    out << detail::csv_escape(r.dataset) << ',' << detail::fmt_double(r.C) << ',' << r.k << ','
        << r.k_pi << ',' << (r.weighted ? 1 : 0) << ',' << (r.sknn ? 1 : 0) << ','
        << detail::fmt_double(r.eps) << ',' << detail::fmt_double(r.mean_return) << ','
        << detail::fmt_double(r.std_return) << ',' << r.solve_iters << ','
        << detail::fmt_double(r.wall_time_ms) << ',' << detail::csv_escape(r.error) << '\n';
  return out.str();
}

inline std::vector<SweepRow> parse_sweep_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != sweep_csv_header())
    throw DataError("unexpected sweep CSV header");
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::csv_split(line);
    if (f.size() != 12) throw DataError("bad sweep CSV row: " + line);
    SweepRow r;
    r.dataset = f[0];
    r.C = std::stod(f[1]);
    r.k = std::stoi(f[2]);
    r.k_pi = std::stoi(f[3]);
    r.weighted = f[4] == "1";
    r.sknn = f[5] == "1";
    r.eps = std::stod(f[6]);
    r.mean_return = std::stod(f[7]);
    r.std_return = std::stod(f[8]);
    r.solve_iters = std::stoi(f[9]);
    r.wall_time_ms = std::stod(f[10]);
    r.error = f[11];
    rows.push_back(std::move(r));
  }
  return rows;
}

} // namespace dacmdp
