#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "errors.hpp"

namespace dacmdp {

// Result of one k-nearest query: dataset tuple indices with their L2
// distances, sorted by (distance, tuple index) ascending.
struct NeighborSet {
  std::vector<uint32_t> indices;
  std::vector<double> distances;
};

// Exact brute-force neighbor search over dataset source states. Candidates
// with a different action are excluded from per-action queries (infinitely
// distant). Ties at equal distance resolve to the lower dataset tuple index,
// which makes answers independent of dataset tuple order.
class NeighborIndex {
public:
  static NeighborIndex build(const ExperienceDataset& ds) {
    ds.validate();
    NeighborIndex idx;
    idx.dim_ = ds.state_dim;
    idx.actions_ = ds.action_count;
    idx.n_ = ds.size();
    idx.points_.resize(idx.n_ * idx.dim_);
    idx.ids_.resize(idx.actions_);
    idx.action_points_.resize(idx.actions_);
    for (std::size_t i = 0; i < idx.n_; ++i) {
      const auto& t = ds.tuples[i];
      std::copy(t.state.begin(), t.state.end(), idx.points_.begin() + std::ptrdiff_t(i) * idx.dim_);
      idx.ids_[t.action].push_back(uint32_t(i));
    }
    for (int a = 0; a < idx.actions_; ++a) {
      auto& pts = idx.action_points_[a];
      pts.resize(idx.ids_[a].size() * idx.dim_);
      for (std::size_t r = 0; r < idx.ids_[a].size(); ++r) {
        const float* src = idx.points_.data() + std::size_t(idx.ids_[a][r]) * idx.dim_;
        std::copy(src, src + idx.dim_, pts.begin() + std::ptrdiff_t(r) * idx.dim_);
      }
    }
    return idx;
  }

  NeighborSet query(std::span<const float> s, int action, int k) const {
    check_query(s, k);
    if (action < 0 || action >= actions_)
      throw ConfigError("knn_query: action " + std::to_string(action) + " out of range");
    const auto& ids = ids_[action];
    if (std::size_t(k) > ids.size())
      throw DataError("insufficient support: action " + std::to_string(action) + " has " +
                      std::to_string(ids.size()) + " tuples, need k=" + std::to_string(k));
    return select(s, action_points_[action].data(), ids.data(), ids.size(), k);
  }

  NeighborSet query_state(std::span<const float> s, int k) const {
    check_query(s, k);
    if (std::size_t(k) > n_)
      throw DataError("insufficient support: dataset has " + std::to_string(n_) +
                      " tuples, need k=" + std::to_string(k));
    return select(s, points_.data(), nullptr, n_, k);
  }

  int state_dim() const { return dim_; }
  int action_count() const { return actions_; }
  std::size_t size() const { return n_; }
  std::size_t action_support(int a) const { return ids_[a].size(); }
  std::span<const float> point(std::size_t i) const {
    return {points_.data() + i * dim_, std::size_t(dim_)};
  }

private:
  void check_query(std::span<const float> s, int k) const {
    if (int(s.size()) != dim_)
      throw ConfigError("query dimension " + std::to_string(s.size()) + " != index dimension " +
                        std::to_string(dim_));
    if (k < 1) throw ConfigError("k must be >= 1");
  }

  // Scans `count` rows keeping the k smallest (squared distance, tuple id)
  // pairs in a max-heap. Squared distances accumulate in double with a fixed
  // component order, so equal vectors always compare equal and the selection
  // matches a full sort under the same comparator.
  NeighborSet select(std::span<const float> s, const float* pts, const uint32_t* ids,
                     std::size_t count, int k) const {
    using Entry = std::pair<double, uint32_t>;
    std::priority_queue<Entry> heap;
    for (std::size_t r = 0; r < count; ++r) {
      const float* p = pts + r * dim_;
      double d2 = 0.0;
      for (int c = 0; c < dim_; ++c) {
        const double diff = double(s[c]) - double(p[c]);
        d2 += diff * diff;
      }
      const Entry cand{d2, ids ? ids[r] : uint32_t(r)};
      if (int(heap.size()) < k) {
        heap.push(cand);
      } else if (cand < heap.top()) {
        heap.pop();
        heap.push(cand);
      }
    }
    NeighborSet out;
    out.indices.resize(heap.size());
    out.distances.resize(heap.size());
    for (std::size_t i = heap.size(); i-- > 0;) {
      out.indices[i] = heap.top().second;
      out.distances[i] = std::sqrt(heap.top().first);
      heap.pop();
    }
    return out;
  }

  int dim_ = 0;
  int actions_ = 0;
  std::size_t n_ = 0;
  std::vector<float> points_;
  std::vector<std::vector<uint32_t>> ids_;
  std::vector<std::vector<float>> action_points_;
};

inline NeighborIndex build_index(const ExperienceDataset& ds) { return NeighborIndex::build(ds); }

inline NeighborSet knn_query(const NeighborIndex& idx, std::span<const float> s, int action, int k) {
  return idx.query(s, action, k);
}

inline NeighborSet knn_query_state(const NeighborIndex& idx, std::span<const float> s, int k) {
  return idx.query_state(s, k);
}

} // namespace dacmdp
