#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "compiler.hpp"
#include "errors.hpp"
#include "knn.hpp"
#include "random.hpp"
#include "solver.hpp"

namespace dacmdp {

// Non-parametric policy over the full continuous state space, backed by the
// solved core Q table. Two decision paths:
//   exact: one neighbor query per action, full one-step lookahead
//     Q(s,a) = sum_i w_i [ r_i + gamma * max_a' Q(s'_i, a') - C * d_i ]
//   sknn:  one state-level neighbor query, actions scored as
//     sum_i w_i * Q(core(s'_i), a)
// Both add action_bias[a] afterward. Lookahead weighting follows the same
// mode (uniform / inverse-distance) the model was compiled with, which is
// what keeps the core fixed-point identity intact.
class PolicyHandle {
public:
  PolicyHandle(const ExperienceDataset& ds, const NeighborIndex& idx, const CoreMdp& mdp,
               const SolveResult& solve, DacConfig cfg)
      : ds_(&ds), idx_(&idx), mdp_(&mdp), solve_(&solve), cfg_(std::move(cfg)),
        action_bias_(mdp.n_actions, 0.0) {
    cfg_.validate();
    if (solve.V.size() != mdp.n_states || solve.Q.size() != std::size_t(mdp.n_states) * mdp.n_actions)
      throw ConfigError("PolicyHandle: solve result does not match MDP shape");
    if (mdp.tuple_to_core.size() == ds.size())
      tuple_to_core_ = mdp.tuple_to_core;
    else
      tuple_to_core_ = build_tuple_to_core(ds, mdp);
  }

  void set_action_bias(std::vector<double> bias) {
    if (bias.size() != action_bias_.size())
      throw ConfigError("action_bias length must equal action count");
    for (double b : bias)
      if (!std::isfinite(b)) throw ConfigError("action_bias must be finite");
    action_bias_ = std::move(bias);
  }
  const std::vector<double>& action_bias() const { return action_bias_; }
  const DacConfig& config() const { return cfg_; }
  int action_count() const { return int(mdp_->n_actions); }

  // Eq.-style one-step lookahead for one action. Terminal neighbors
  // contribute their reward (and distance penalty) with no future term.
  double q_lookahead(std::span<const float> s, int action) const {
    const NeighborSet ns = idx_->query(s, action, cfg_.k_pi);
    std::vector<double> w;
    averaging_weights(ns.distances, cfg_.weighted, cfg_.delta_d, w);
    double q = 0.0;
    for (std::size_t j = 0; j < ns.indices.size(); ++j) {
      const uint32_t tup = ns.indices[j];
      const auto& t = ds_->tuples[tup];
      double future = 0.0;
      if (!t.terminal) future = cfg_.gamma * solve_->V[tuple_to_core_[tup]];
      q += w[j] * (double(t.reward) + future - cfg_.cost * ns.distances[j]);
    }
    return q + action_bias_[action];
  }

  int act_greedy(std::span<const float> s) const {
    return cfg_.sknn ? act_sknn(s) : act_exact(s);
  }

  int act_eps_greedy(std::span<const float> s, double eps, SeededRng& rng) const {
    if (!(eps >= 0.0 && eps <= 1.0)) throw ConfigError("eps must be in [0, 1]");
    if (eps > 0.0 && rng.uniform01() < eps) return rng.uniform_int(int(mdp_->n_actions));
    return act_greedy(s);
  }

private:
  int act_exact(std::span<const float> s) const {
    int best = 0;
    double best_q = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < int(mdp_->n_actions); ++a) {
      const double q = q_lookahead(s, a);
      if (q > best_q) {
        best_q = q;
        best = a;
      }
    }
    return best;
  }

  int act_sknn(std::span<const float> s) const {
    const NeighborSet ns = idx_->query_state(s, cfg_.k_pi);
    std::vector<double> w;
    averaging_weights(ns.distances, cfg_.weighted, cfg_.delta_d, w);
    int best = 0;
    double best_q = -std::numeric_limits<double>::infinity();
    for (uint32_t a = 0; a < mdp_->n_actions; ++a) {
      double q = 0.0;
      for (std::size_t j = 0; j < ns.indices.size(); ++j)
        q += w[j] * solve_->q(tuple_to_core_[ns.indices[j]], a, mdp_->n_actions);
      q += action_bias_[a];
      if (q > best_q) {
        best_q = q;
        best = int(a);
      }
    }
    return best;
  }

  const ExperienceDataset* ds_;
  const NeighborIndex* idx_;
  const CoreMdp* mdp_;
  const SolveResult* solve_;
  DacConfig cfg_;
  std::vector<double> action_bias_;
  std::vector<uint32_t> tuple_to_core_;
};

} // namespace dacmdp
