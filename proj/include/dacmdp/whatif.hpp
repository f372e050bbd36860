#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "compiler.hpp"
#include "errors.hpp"
#include "solver.hpp"

namespace dacmdp {

// Zero-shot model transformation requested before a re-solve.
struct ModifierSpec {
  enum class Kind { action_penalty, discount_override, slip };
  Kind kind = Kind::slip;
  int action = -1;       // action_penalty
  double penalty = 0.0;  // action_penalty
  double gamma = 0.0;    // discount_override
  double prob = 0.0;     // slip

  // Accepts "action_penalty:<action>:<penalty>", "discount:<gamma>",
  // "slip:<prob>". The action may be an integer or a name resolved through
  // `action_names` (case-insensitive).
  static ModifierSpec parse(const std::string& text,
                            const std::map<std::string, int>& action_names = {}) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const std::size_t next = text.find(':', pos);
      parts.push_back(text.substr(pos, next == std::string::npos ? next : next - pos));
      if (next == std::string::npos) break;
      pos = next + 1;
    }
    auto to_double = [&](const std::string& s, const char* what) {
      try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
        return v;
      } catch (const std::exception&) {
        throw ConfigError("modifier: cannot parse " + std::string(what) + " '" + s + "'");
      }
    };
    ModifierSpec m;
    if (parts.empty()) throw ConfigError("empty modifier");
    if (parts[0] == "action_penalty") {
      if (parts.size() != 3) throw ConfigError("modifier: expected action_penalty:<action>:<penalty>");
      std::string name = parts[1];
      std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) {
        return char(std::tolower(c));
      });
      if (auto it = action_names.find(name); it != action_names.end()) {
        m.action = it->second;
      } else {
        try {
          m.action = std::stoi(parts[1]);
        } catch (const std::exception&) {
          throw ConfigError("modifier: unknown action '" + parts[1] + "'");
        }
      }
      m.penalty = to_double(parts[2], "penalty");
      m.kind = Kind::action_penalty;
    } else if (parts[0] == "discount") {
      if (parts.size() != 2) throw ConfigError("modifier: expected discount:<gamma>");
      m.gamma = to_double(parts[1], "gamma");
      if (!(m.gamma > 0.0 && m.gamma < 1.0)) throw ConfigError("modifier: gamma must be in (0, 1)");
      m.kind = Kind::discount_override;
    } else if (parts[0] == "slip") {
      if (parts.size() != 2) throw ConfigError("modifier: expected slip:<prob>");
      m.prob = to_double(parts[1], "prob");
      if (!(m.prob >= 0.0 && m.prob <= 1.0)) throw ConfigError("modifier: slip prob must be in [0, 1]");
      m.kind = Kind::slip;
    } else {
      throw ConfigError("unknown modifier '" + parts[0] + "'");
    }
    return m;
  }
};

// R[., a] -= penalty; transitions untouched. Pure (returns a new model).
inline CoreMdp apply_action_penalty(const CoreMdp& mdp, int action, double penalty) {
  if (action < 0 || action >= int(mdp.n_actions))
    throw ConfigError("apply_action_penalty: action out of range");
  if (!std::isfinite(penalty)) throw ConfigError("apply_action_penalty: penalty must be finite");
  CoreMdp out = mdp;
  for (uint32_t s = 0; s < out.n_states; ++s) out.reward[out.row(s, uint32_t(action))] -= penalty;
  return out;
}

// Re-solve only; compilation untouched.
inline SolveResult resolve_with_discount(const CoreMdp& mdp, double gamma, DacConfig cfg,
                                         unsigned threads = 1) {
  cfg.gamma = gamma;
  cfg.validate();
  return solve_parallel(mdp, cfg, threads);
}

// Each row (s,a) becomes the mixture (1-rho) * row(s,a) + rho/|A| * sum_b
// row(s,b), for both transition mass and reward. Merged per (successor,
// terminal-flag) slot in first-seen order; rows renormalized by their exact
// mixture mass. The slot width grows to the widest merged row.
inline CoreMdp apply_slip(const CoreMdp& mdp, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("apply_slip: rho must be in [0, 1]");
  if (rho == 0.0) return mdp;

  const uint32_t A = mdp.n_actions;
  const double uniform_coeff = rho / double(A);
  struct Slot {
    uint32_t succ;
    uint8_t term;
    double mass;
  };
  const std::size_t rows = std::size_t(mdp.n_states) * A;
  std::vector<std::vector<Slot>> merged(rows);
  std::vector<double> new_reward(rows);
  uint32_t new_k = 1;

  for (uint32_t s = 0; s < mdp.n_states; ++s) {
    for (uint32_t a = 0; a < A; ++a) {
      auto& out = merged[mdp.row(s, a)];
      double rew = 0.0;
      for (uint32_t b = 0; b < A; ++b) {
        const double coeff = uniform_coeff + (b == a ? 1.0 - rho : 0.0);
        if (coeff == 0.0) continue;
        rew += coeff * mdp.reward[mdp.row(s, b)];
        const std::size_t base = mdp.slot_base(s, b);
        for (uint32_t j = 0; j < mdp.k; ++j) {
          const double mass = coeff * mdp.succ_prob[base + j];
          if (mass == 0.0) continue;
          const uint32_t succ = mdp.succ_index[base + j];
          const uint8_t term = mdp.succ_terminal[base + j];
          bool found = false;
          for (auto& slot : out)
            if (slot.succ == succ && slot.term == term) {
              slot.mass += mass;
              found = true;
              break;
            }
          if (!found) out.push_back({succ, term, mass});
        }
      }
      new_reward[mdp.row(s, a)] = rew;
      new_k = std::max<uint32_t>(new_k, uint32_t(out.size()));
    }
  }

  CoreMdp out;
  out.n_states = mdp.n_states;
  out.n_actions = A;
  out.k = new_k;
  out.state_dim = mdp.state_dim;
  out.state_vectors = mdp.state_vectors;
  out.tuple_to_core = mdp.tuple_to_core;
  out.provenance = mdp.provenance;
  out.reward = std::move(new_reward);
  out.succ_index.assign(rows * new_k, 0);
  out.succ_prob.assign(rows * new_k, 0.0);
  out.succ_terminal.assign(rows * new_k, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    double total = 0.0;
    for (const auto& slot : merged[r]) total += slot.mass;
    const std::size_t base = r * new_k;
    for (std::size_t j = 0; j < merged[r].size(); ++j) {
      out.succ_index[base + j] = merged[r][j].succ;
      out.succ_terminal[base + j] = merged[r][j].term;
      out.succ_prob[base + j] = merged[r][j].mass / total;
    }
  }
  return out;
}

inline CoreMdp apply_modifier(const CoreMdp& mdp, const ModifierSpec& m) {
  switch (m.kind) {
    case ModifierSpec::Kind::action_penalty:
      return apply_action_penalty(mdp, m.action, m.penalty);
    case ModifierSpec::Kind::slip:
      return apply_slip(mdp, m.prob);
    case ModifierSpec::Kind::discount_override:
      return mdp;  // discount lives in the solve, not the model
  }
  throw ConfigError("unreachable modifier kind");
}

} // namespace dacmdp
