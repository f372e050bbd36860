#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "errors.hpp"
#include "knn.hpp"
#include "parallel.hpp"

namespace dacmdp {

// Hyperparameters shared by compilation, solving, and policy extraction.
struct DacConfig {
  int k = 5;                // smoothing factor: neighbors per compiled row
  double cost = 1.0;        // cost factor C: penalty per unit neighbor distance
  double gamma = 0.99;      // discount
  int k_pi = 11;            // policy smoothing: neighbors per decision-time query
  bool weighted = true;     // inverse-distance weighted averaging
  bool sknn = true;         // one state-level query per decision instead of |A|
  double delta_d = 1e-5;    // distance regularizer inside the weights
  double delta_min = 1e-4;  // VI convergence threshold (sup-norm residual)
  int max_iters = 10000;

  void validate() const {
    if (k < 1) throw ConfigError("k must be >= 1");
    if (k_pi < 1) throw ConfigError("kpi must be >= 1");
    if (!(cost >= 0.0) || !std::isfinite(cost)) throw ConfigError("cost must be finite and >= 0");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must be in (0, 1)");
    if (!(delta_d > 0.0)) throw ConfigError("delta_d must be > 0");
    if (!(delta_min > 0.0)) throw ConfigError("tol (delta_min) must be > 0");
    if (max_iters < 1) throw ConfigError("max-iters must be >= 1");
  }
};

// Finite MDP over the core states (distinct destination states of the
// dataset) in list-of-lists sparse form: per (state, action) row, k successor
// slots holding a core-state index, a probability, and a terminal mask bit.
// Masked slots keep their probability mass but contribute zero future value.
struct CoreMdp {
  uint32_t n_states = 0;
  uint32_t n_actions = 0;
  uint32_t k = 0;
  int state_dim = 0;
  std::vector<uint32_t> succ_index;    // n_states * n_actions * k
  std::vector<double> succ_prob;       // n_states * n_actions * k
  std::vector<uint8_t> succ_terminal;  // n_states * n_actions * k
  std::vector<double> reward;          // n_states * n_actions
  std::vector<float> state_vectors;    // n_states * state_dim
  std::vector<uint32_t> tuple_to_core; // dataset tuple -> core id; empty after load
  DacConfig provenance;

  std::size_t row(uint32_t s, uint32_t a) const { return std::size_t(s) * n_actions + a; }
  std::size_t slot_base(uint32_t s, uint32_t a) const { return row(s, a) * k; }
  std::span<const float> state(uint32_t s) const {
    return {state_vectors.data() + std::size_t(s) * state_dim, std::size_t(state_dim)};
  }
  double max_reward() const { return *std::max_element(reward.begin(), reward.end()); }
  double min_reward() const { return *std::min_element(reward.begin(), reward.end()); }

  // prob_tol is 1e-9 for compiled models; loaded models carry f32-quantized
  // probabilities and validate at 1e-5.
  void validate(double prob_tol = 1e-9) const {
    if (n_states == 0 || n_actions == 0 || k == 0) throw DataError("empty CoreMdp");
    const std::size_t slots = std::size_t(n_states) * n_actions * k;
    if (succ_index.size() != slots || succ_prob.size() != slots || succ_terminal.size() != slots ||
        reward.size() != std::size_t(n_states) * n_actions)
      throw DataError("CoreMdp array sizes inconsistent");
    for (uint32_t s = 0; s < n_states; ++s)
      for (uint32_t a = 0; a < n_actions; ++a) {
        const std::size_t base = slot_base(s, a);
        double mass = 0.0;
        for (uint32_t j = 0; j < k; ++j) {
          if (succ_index[base + j] >= n_states) throw DataError("successor index out of range");
          if (succ_prob[base + j] < 0.0) throw DataError("negative transition probability");
          mass += succ_prob[base + j];
        }
        if (std::abs(mass - 1.0) > prob_tol)
          throw DataError("row (" + std::to_string(s) + "," + std::to_string(a) +
                          ") probabilities sum to " + std::to_string(mass));
        if (!std::isfinite(reward[row(s, a)])) throw DataError("non-finite compiled reward");
      }
  }
};

// Normalized averaging weights over one neighbor set. Uniform 1/k, or
// alpha_i = d'_i / sum_j d'_j with d'_i = 1 / (d_i + delta_d).
inline void averaging_weights(std::span<const double> dists, bool weighted, double delta_d,
                              std::vector<double>& w) {
  const std::size_t k = dists.size();
  w.resize(k);
  if (!weighted) {
    std::fill(w.begin(), w.end(), 1.0 / double(k));
    return;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    w[i] = 1.0 / (dists[i] + delta_d);
    total += w[i];
  }
  for (std::size_t i = 0; i < k; ++i) w[i] /= total;
}

namespace detail {

struct VecBytesHash {
  std::size_t operator()(const std::string& s) const {
    // FNV-1a over the raw f32 bytes
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return std::size_t(h);
  }
};

inline std::string vec_bytes(const float* p, int dim) {
  return std::string(reinterpret_cast<const char*>(p), std::size_t(dim) * sizeof(float));
}

} // namespace detail

// Everything compilation needs that does not depend on (C, weighted): the
// neighbor sets of every (core state, action) row. Rebuilding a CoreMdp for a
// new cost factor or averaging mode from the cache is pure arithmetic — no
// new kNN queries — which is what makes C sweeps cheap.
struct CompileCache {
  uint32_t n_states = 0;
  uint32_t n_actions = 0;
  uint32_t k = 0;
  int state_dim = 0;
  std::vector<uint32_t> nbr_tuple;   // n*A*k dataset tuple ids
  std::vector<double> nbr_dist;      // n*A*k
  std::vector<float> nbr_reward;     // n*A*k
  std::vector<uint32_t> nbr_succ;    // n*A*k successor core ids
  std::vector<uint8_t> nbr_term;     // n*A*k
  std::vector<float> state_vectors;  // n*d
  std::vector<uint32_t> tuple_to_core;
};

inline CompileCache build_compile_cache(const ExperienceDataset& ds, const NeighborIndex& idx,
                                        int k, unsigned threads = 1) {
  if (k < 1) throw ConfigError("k must be >= 1");
  for (int a = 0; a < ds.action_count; ++a)
    if (idx.action_support(a) < std::size_t(k))
      throw DataError("insufficient support: action " + std::to_string(a) + " has " +
                      std::to_string(idx.action_support(a)) + " tuples, need k=" + std::to_string(k));

  CompileCache cache;
  cache.n_actions = uint32_t(ds.action_count);
  cache.k = uint32_t(k);
  cache.state_dim = ds.state_dim;

  // Core states: distinct destination states, merged on the exact f32 bit
  // pattern, numbered in first-appearance order.
  std::unordered_map<std::string, uint32_t, detail::VecBytesHash> core_of;
  core_of.reserve(ds.size() * 2);
  cache.tuple_to_core.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& ns = ds.tuples[i].next_state;
    auto [it, inserted] = core_of.try_emplace(detail::vec_bytes(ns.data(), ds.state_dim),
                                              uint32_t(core_of.size()));
    if (inserted)
      cache.state_vectors.insert(cache.state_vectors.end(), ns.begin(), ns.end());
    cache.tuple_to_core[i] = it->second;
  }
  cache.n_states = uint32_t(core_of.size());

  const std::size_t slots = std::size_t(cache.n_states) * cache.n_actions * cache.k;
  cache.nbr_tuple.resize(slots);
  cache.nbr_dist.resize(slots);
  cache.nbr_reward.resize(slots);
  cache.nbr_succ.resize(slots);
  cache.nbr_term.resize(slots);

  parallel_for_blocks(cache.n_states, threads, [&](std::size_t begin, std::size_t end, unsigned) {
    for (std::size_t s = begin; s < end; ++s) {
      const std::span<const float> query{cache.state_vectors.data() + s * cache.state_dim,
                                         std::size_t(cache.state_dim)};
      for (uint32_t a = 0; a < cache.n_actions; ++a) {
        const NeighborSet ns = idx.query(query, int(a), k);
        const std::size_t base = (s * cache.n_actions + a) * cache.k;
        for (int j = 0; j < k; ++j) {
          const uint32_t tup = ns.indices[j];
          cache.nbr_tuple[base + j] = tup;
          cache.nbr_dist[base + j] = ns.distances[j];
          cache.nbr_reward[base + j] = ds.tuples[tup].reward;
          cache.nbr_succ[base + j] = cache.tuple_to_core[tup];
          cache.nbr_term[base + j] = ds.tuples[tup].terminal ? 1 : 0;
        }
      }
    }
  });
  return cache;
}

// Assembles the sparse MDP from cached neighbor sets for one (C, weighted)
// setting. Duplicate successors within a row (same core index and terminal
// flag) are merged in first-seen order; spare slots are zero-mass padding.
inline CoreMdp compile_from_cache(const CompileCache& cache, const DacConfig& cfg) {
  cfg.validate();
  if (uint32_t(cfg.k) != cache.k)
    throw ConfigError("compile_from_cache: cfg.k=" + std::to_string(cfg.k) +
                      " does not match cache k=" + std::to_string(cache.k));

  CoreMdp mdp;
  mdp.n_states = cache.n_states;
  mdp.n_actions = cache.n_actions;
  mdp.k = cache.k;
  mdp.state_dim = cache.state_dim;
  mdp.state_vectors = cache.state_vectors;
  mdp.tuple_to_core = cache.tuple_to_core;
  mdp.provenance = cfg;

  const std::size_t rows = std::size_t(mdp.n_states) * mdp.n_actions;
  mdp.succ_index.assign(rows * mdp.k, 0);
  mdp.succ_prob.assign(rows * mdp.k, 0.0);
  mdp.succ_terminal.assign(rows * mdp.k, 0);
  mdp.reward.assign(rows, 0.0);

  std::vector<double> w;
  std::vector<double> dists(mdp.k);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t base = r * mdp.k;
    for (uint32_t j = 0; j < mdp.k; ++j) dists[j] = cache.nbr_dist[base + j];
    averaging_weights(dists, cfg.weighted, cfg.delta_d, w);

    double rew = 0.0;
    uint32_t filled = 0;
    for (uint32_t j = 0; j < mdp.k; ++j) {
      rew += w[j] * (double(cache.nbr_reward[base + j]) - cfg.cost * dists[j]);
      const uint32_t succ = cache.nbr_succ[base + j];
      const uint8_t term = cache.nbr_term[base + j];
      uint32_t slot = filled;
      for (uint32_t m = 0; m < filled; ++m)
        if (mdp.succ_index[base + m] == succ && mdp.succ_terminal[base + m] == term) {
          slot = m;
          break;
        }
      if (slot == filled) {
        mdp.succ_index[base + slot] = succ;
        mdp.succ_terminal[base + slot] = term;
        ++filled;
      }
      mdp.succ_prob[base + slot] += w[j];
    }
    if (!std::isfinite(rew))
      throw NumericError("non-finite compiled reward at row " + std::to_string(r));
    mdp.reward[r] = rew;
  }
  return mdp;
}

inline CoreMdp compile(const ExperienceDataset& ds, const NeighborIndex& idx, const DacConfig& cfg,
                       unsigned threads = 1) {
  cfg.validate();
  return compile_from_cache(build_compile_cache(ds, idx, cfg.k, threads), cfg);
}

struct CoverageStats {
  double d_bar_max = 0.0;
  double d_bar_mean = 0.0;
  std::vector<std::size_t> per_action_support;
};

// Average-kNN-distance diagnostics over an explicit query set.
inline CoverageStats coverage_stats_for_queries(const NeighborIndex& idx,
                                                std::span<const float> queries, int k,
                                                unsigned threads = 1) {
  const int dim = idx.state_dim();
  const std::size_t n_queries = queries.size() / std::size_t(dim);
  const unsigned workers = std::max(1u, threads);
  std::vector<double> worker_max(workers, 0.0), worker_sum(workers, 0.0);
  parallel_for_blocks(n_queries, workers, [&](std::size_t begin, std::size_t end, unsigned w) {
    for (std::size_t q = begin; q < end; ++q) {
      const std::span<const float> s{queries.data() + q * dim, std::size_t(dim)};
      for (int a = 0; a < idx.action_count(); ++a) {
        const NeighborSet ns = idx.query(s, a, k);
        double avg = 0.0;
        for (double d : ns.distances) avg += d;
        avg /= double(k);
        worker_max[w] = std::max(worker_max[w], avg);
        worker_sum[w] += avg;
      }
    }
  });
  CoverageStats st;
  for (unsigned w = 0; w < workers; ++w) {
    st.d_bar_max = std::max(st.d_bar_max, worker_max[w]);
    st.d_bar_mean += worker_sum[w];
  }
  st.d_bar_mean /= double(n_queries) * idx.action_count();
  st.per_action_support.resize(idx.action_count());
  for (int a = 0; a < idx.action_count(); ++a) st.per_action_support[a] = idx.action_support(a);
  return st;
}

// Dataset-restricted proxy for the worst-case average kNN distance: the
// query set is every dataset source state crossed with every action.
inline CoverageStats coverage_stats(const ExperienceDataset& ds, const NeighborIndex& idx,
                                    const DacConfig& cfg, unsigned threads = 1) {
  cfg.validate();
  std::vector<float> queries(ds.size() * std::size_t(ds.state_dim));
  for (std::size_t i = 0; i < ds.size(); ++i)
    std::copy(ds.tuples[i].state.begin(), ds.tuples[i].state.end(),
              queries.begin() + std::ptrdiff_t(i * ds.state_dim));
  return coverage_stats_for_queries(idx, queries, cfg.k, threads);
}

// ---------------------------------------------------------------------------
// Persistence. Layout: magic "DACM", u32 version=1, u32 n_states,
// u32 n_actions, u32 k, then T_I as u32[n*A*k], T_P as f32[n*A*k],
// R as f32[n*A], terminal mask as u8[n*A*k], state vectors as f32[n*d].
// Little-endian. The state dimension is recovered from the trailing array
// length. Loading then saving reproduces the file byte-for-byte.
// ---------------------------------------------------------------------------

inline void save_mdp(const CoreMdp& mdp, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out.write("DACM", 4);
  detail::write_pod(out, uint32_t(1));
  detail::write_pod(out, mdp.n_states);
  detail::write_pod(out, mdp.n_actions);
  detail::write_pod(out, mdp.k);
  const std::size_t slots = std::size_t(mdp.n_states) * mdp.n_actions * mdp.k;
  out.write(reinterpret_cast<const char*>(mdp.succ_index.data()), std::streamsize(slots * 4));
  std::vector<float> f32buf(slots);
  for (std::size_t i = 0; i < slots; ++i) f32buf[i] = float(mdp.succ_prob[i]);
  out.write(reinterpret_cast<const char*>(f32buf.data()), std::streamsize(slots * 4));
  f32buf.resize(mdp.reward.size());
  for (std::size_t i = 0; i < mdp.reward.size(); ++i) f32buf[i] = float(mdp.reward[i]);
  out.write(reinterpret_cast<const char*>(f32buf.data()), std::streamsize(f32buf.size() * 4));
  out.write(reinterpret_cast<const char*>(mdp.succ_terminal.data()), std::streamsize(slots));
  out.write(reinterpret_cast<const char*>(mdp.state_vectors.data()),
            std::streamsize(mdp.state_vectors.size() * 4));
  if (!out) throw DataError("write failure: " + path);
}

inline CoreMdp load_mdp(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw DataError("cannot open MDP file: " + path);
  const std::streamoff file_size = in.tellg();
  in.seekg(0);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "DACM", 4) != 0)
    throw DataError("bad magic in " + path + " (expected DACM)");
  const auto version = detail::read_pod<uint32_t>(in, "version");
  if (version != 1) throw DataError("unsupported DACM version " + std::to_string(version));
  CoreMdp mdp;
  mdp.n_states = detail::read_pod<uint32_t>(in, "n_states");
  mdp.n_actions = detail::read_pod<uint32_t>(in, "n_actions");
  mdp.k = detail::read_pod<uint32_t>(in, "k");
  if (mdp.n_states == 0 || mdp.n_actions == 0 || mdp.k == 0)
    throw DataError("empty CoreMdp in " + path);
  const std::size_t slots = std::size_t(mdp.n_states) * mdp.n_actions * mdp.k;
  const std::size_t rows = std::size_t(mdp.n_states) * mdp.n_actions;
  const std::streamoff fixed = 4 + 4 * 4 + std::streamoff(slots * 4 + slots * 4 + rows * 4 + slots);
  if (file_size < fixed) throw DataError("truncated MDP file: " + path);
  const std::streamoff trailing = file_size - fixed;
  if (trailing % std::streamoff(4 * mdp.n_states) != 0)
    throw DataError("cannot infer state dimension from file size: " + path);
  mdp.state_dim = int(trailing / std::streamoff(4 * mdp.n_states));

  mdp.succ_index.resize(slots);
  in.read(reinterpret_cast<char*>(mdp.succ_index.data()), std::streamsize(slots * 4));
  std::vector<float> f32buf(slots);
  in.read(reinterpret_cast<char*>(f32buf.data()), std::streamsize(slots * 4));
  mdp.succ_prob.assign(f32buf.begin(), f32buf.end());
  f32buf.resize(rows);
  in.read(reinterpret_cast<char*>(f32buf.data()), std::streamsize(rows * 4));
  mdp.reward.assign(f32buf.begin(), f32buf.end());
  mdp.succ_terminal.resize(slots);
  in.read(reinterpret_cast<char*>(mdp.succ_terminal.data()), std::streamsize(slots));
  mdp.state_vectors.resize(std::size_t(mdp.n_states) * mdp.state_dim);
  in.read(reinterpret_cast<char*>(mdp.state_vectors.data()),
          std::streamsize(mdp.state_vectors.size() * 4));
  if (!in) throw DataError("unexpected end of file: " + path);
  mdp.provenance.k = int(mdp.k);
  mdp.validate(1e-5);
  return mdp;
}

// Rebuilds the dataset-tuple -> core-state mapping for an MDP that came from
// disk (compile keeps it in memory; the file format does not carry it).
inline std::vector<uint32_t> build_tuple_to_core(const ExperienceDataset& ds, const CoreMdp& mdp) {
  if (ds.state_dim != mdp.state_dim)
    throw DataError("dataset/MDP state dimension mismatch");
  std::unordered_map<std::string, uint32_t, detail::VecBytesHash> core_of;
  core_of.reserve(mdp.n_states * 2);
  for (uint32_t s = 0; s < mdp.n_states; ++s)
    core_of.emplace(detail::vec_bytes(mdp.state_vectors.data() + std::size_t(s) * mdp.state_dim,
                                      mdp.state_dim),
                    s);
  std::vector<uint32_t> map(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto it = core_of.find(detail::vec_bytes(ds.tuples[i].next_state.data(), mdp.state_dim));
    if (it == core_of.end())
      throw DataError("tuple " + std::to_string(i) +
                      ": destination state not found among MDP core states (dataset/MDP mismatch)");
    map[i] = it->second;
  }
  return map;
}

} // namespace dacmdp
