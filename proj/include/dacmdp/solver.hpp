#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "compiler.hpp"
#include "errors.hpp"
#include "parallel.hpp"

namespace dacmdp {

struct SolveResult {
  std::vector<double> V;                 // length n_states
  std::vector<double> Q;                 // n_states * n_actions, row-major
  double residual = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;                // false means max_iters cutoff
  double wall_time_ms = 0.0;
  std::vector<double> residual_history;  // sup-norm residual after each sweep

  double q(uint32_t s, uint32_t a, uint32_t n_actions) const {
    return Q[std::size_t(s) * n_actions + a];
  }
};

// One Jacobi sweep: every state backs up from the immutable V_in snapshot and
// writes disjoint slots of V_out/Q_out/delta, so the result is bit-identical
// for any thread count. Terminal-masked successor slots keep their
// probability mass but contribute zero future value. Accumulation is double
// precision throughout.
inline void bellman_sweep_into(const CoreMdp& mdp, std::span<const double> V_in,
                               std::span<double> V_out, std::span<double> Q_out,
                               std::span<double> delta, double gamma, unsigned threads = 1) {
  const uint32_t A = mdp.n_actions;
  const uint32_t k = mdp.k;
  parallel_for_blocks(mdp.n_states, threads, [&](std::size_t begin, std::size_t end, unsigned) {
    for (std::size_t i = begin; i < end; ++i) {
      double best = -std::numeric_limits<double>::infinity();
      const std::size_t row0 = i * A;
      for (uint32_t a = 0; a < A; ++a) {
        const std::size_t base = (row0 + a) * k;
        double acc = 0.0;
        for (uint32_t j = 0; j < k; ++j)
          if (!mdp.succ_terminal[base + j])
            acc += mdp.succ_prob[base + j] * V_in[mdp.succ_index[base + j]];
        const double q = mdp.reward[row0 + a] + gamma * acc;
        Q_out[row0 + a] = q;
        if (q > best) best = q;
      }
      V_out[i] = best;
      delta[i] = std::abs(best - V_in[i]);
    }
  });
}

struct SweepResult {
  std::vector<double> V_out;
  std::vector<double> Q_out;
  std::vector<double> delta;
};

inline SweepResult bellman_sweep(const CoreMdp& mdp, std::span<const double> V_in,
                                 double gamma, unsigned threads = 1) {
  if (V_in.size() != mdp.n_states) throw ConfigError("bellman_sweep: V_in length mismatch");
  for (double v : V_in)
    if (!std::isfinite(v)) throw NumericError("bellman_sweep: non-finite V_in");
  SweepResult r;
  r.V_out.resize(mdp.n_states);
  r.Q_out.resize(std::size_t(mdp.n_states) * mdp.n_actions);
  r.delta.resize(mdp.n_states);
  bellman_sweep_into(mdp, V_in, r.V_out, r.Q_out, r.delta, gamma, threads);
  return r;
}

// Value iteration from V=0 with double-buffered Jacobi sweeps, stopping when
// the sup-norm residual drops to delta_min or max_iters is hit.
inline SolveResult solve_parallel(const CoreMdp& mdp, const DacConfig& cfg, unsigned threads) {
  cfg.validate();
  threads = resolve_threads(threads);
  const auto t0 = std::chrono::steady_clock::now();

  const std::size_t n = mdp.n_states;
  std::vector<double> V(n, 0.0), V_next(n, 0.0), delta(n, 0.0);
  std::vector<double> Q(n * mdp.n_actions, 0.0);

  SolveResult res;
  res.residual_history.reserve(256);
  while (res.iterations < cfg.max_iters) {
    bellman_sweep_into(mdp, V, V_next, Q, delta, cfg.gamma, threads);
    ++res.iterations;
    double sup = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(V_next[i]))
        throw NumericError("value iteration diverged: non-finite value at state " +
                           std::to_string(i));
      if (delta[i] > sup) sup = delta[i];
    }
    res.residual = sup;
    res.residual_history.push_back(sup);
    V.swap(V_next);
    if (sup <= cfg.delta_min) {
      res.converged = true;
      break;
    }
  }
  res.V = std::move(V);
  res.Q = std::move(Q);
  const auto t1 = std::chrono::steady_clock::now();
  res.wall_time_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  return res;
}

inline SolveResult value_iterate(const CoreMdp& mdp, const DacConfig& cfg) {
  return solve_parallel(mdp, cfg, 1);
}

} // namespace dacmdp
