#pragma once

#include <cstdint>

#include "compiler.hpp"
#include "random.hpp"

namespace dacmdp {

// Seed-deterministic random sparse MDP for tests and benchmarks. Successor
// sets are uniform random states; row probabilities are normalized positive
// draws; rewards are uniform in [reward_lo, reward_hi]. state_dim is zero —
// synthetic MDPs have no feature vectors.
inline CoreMdp make_random_mdp(uint32_t n_states, uint32_t n_actions, uint32_t k, uint64_t seed,
                               double reward_lo = 0.0, double reward_hi = 1.0,
                               double terminal_frac = 0.0) {
  SeededRng rng(seed);
  CoreMdp mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.k = k;
  mdp.state_dim = 0;
  const std::size_t rows = std::size_t(n_states) * n_actions;
  mdp.succ_index.resize(rows * k);
  mdp.succ_prob.resize(rows * k);
  mdp.succ_terminal.resize(rows * k);
  mdp.reward.resize(rows);
  std::vector<double> raw(k);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t base = r * k;
    double total = 0.0;
    for (uint32_t j = 0; j < k; ++j) {
      mdp.succ_index[base + j] = uint32_t(rng.uniform_int(int(n_states)));
      mdp.succ_terminal[base + j] = rng.uniform01() < terminal_frac ? 1 : 0;
      raw[j] = 0.05 + rng.uniform01();
      total += raw[j];
    }
    for (uint32_t j = 0; j < k; ++j) mdp.succ_prob[base + j] = raw[j] / total;
    mdp.reward[r] = rng.uniform(reward_lo, reward_hi);
  }
  return mdp;
}

} // namespace dacmdp
