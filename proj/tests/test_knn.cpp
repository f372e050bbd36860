#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "dacmdp/knn.hpp"
#include "dacmdp/random.hpp"
#include "oracles.hpp"

using namespace dacmdp;

namespace {

std::vector<float> random_query(SeededRng& rng, int dim) {
  std::vector<float> q(static_cast<std::size_t>(dim));
  for (auto& v : q) v = float(rng.uniform(-1.2, 1.2));
  return q;
}

} // namespace

TEST_CASE("per-action partition sizes") {
  ExperienceDataset ds;
  ds.action_count = 2;
  ds.state_dim = 1;
  ds.tuples = {{{0.f}, 0, 0.f, {0.f}, false},
               {{1.f}, 0, 0.f, {0.f}, false},
               {{2.f}, 1, 0.f, {0.f}, false}};
  const auto idx = build_index(ds);
  CHECK(idx.action_support(0) == 2);
  CHECK(idx.action_support(1) == 1);
}

TEST_CASE("self-match returns the query point at distance zero") {
  const auto ds = oracles::random_dataset(42, 100, 3, 2);
  const auto idx = build_index(ds);
  for (uint32_t i : {0u, 17u, 99u}) {
    const auto ns = knn_query(idx, ds.tuples[i].state, ds.tuples[i].action, 1);
    CHECK(ns.indices[0] == i);
    CHECK(ns.distances[0] == 0.0);
    const auto gs = knn_query_state(idx, ds.tuples[i].state, 1);
    CHECK(gs.distances[0] == 0.0);
  }
}

TEST_CASE("k equal to the full per-action support returns everything") {
  const auto ds = oracles::random_dataset(7, 60, 2, 3);
  const auto idx = build_index(ds);
  SeededRng rng(1);
  const auto q = random_query(rng, 2);
  for (int a = 0; a < 3; ++a) {
    const int k = int(idx.action_support(a));
    const auto ns = knn_query(idx, q, a, k);
    CHECK(int(ns.indices.size()) == k);
    for (uint32_t i : ns.indices) CHECK(ds.tuples[i].action == a);
  }
}

TEST_CASE("insufficient support raises") {
  const auto ds = oracles::random_dataset(3, 6, 2, 3);
  const auto idx = build_index(ds);
  SeededRng rng(2);
  const auto q = random_query(rng, 2);
  CHECK_THROWS_WITH_AS(knn_query(idx, q, 0, 100), doctest::Contains("insufficient support"),
                       DataError);
  CHECK_THROWS_AS(knn_query_state(idx, q, 100), DataError);
}

TEST_CASE("matches the full-sort brute-force oracle on 500 random queries") {
  for (uint64_t seed : {10ull, 11ull}) {
    // duplicate states force exact distance ties through the tie-break rule
    const auto ds = oracles::random_dataset(seed, 400, 3, 3, 0.3);
    const auto idx = build_index(ds);
    SeededRng rng(seed * 100);
    for (int trial = 0; trial < 250; ++trial) {
      const auto q = random_query(rng, 3);
      const int a = rng.uniform_int(3);
      const int k = 1 + rng.uniform_int(int(idx.action_support(a)));
      const auto got = knn_query(idx, q, a, k);
      const auto want = oracles::knn_full_sort(ds, q, a, k);
      REQUIRE(got.indices.size() == want.size());
      for (std::size_t j = 0; j < want.size(); ++j) {
        CHECK(got.indices[j] == want[j].second);
        CHECK(got.distances[j] == want[j].first);
      }
      const int ks = 1 + rng.uniform_int(20);
      const auto got_s = knn_query_state(idx, q, ks);
      const auto want_s = oracles::knn_full_sort(ds, q, -1, ks);
      for (std::size_t j = 0; j < want_s.size(); ++j)
        CHECK(got_s.indices[j] == want_s[j].second);
    }
  }
}

TEST_CASE("permutation of the dataset maps to the same neighbors") {
  // no duplicate states, so answers are unique and must map exactly
  const auto ds = oracles::random_dataset(33, 120, 3, 2, 0.0);
  SeededRng rng(34);
  std::vector<uint32_t> perm(ds.size());
  std::iota(perm.begin(), perm.end(), 0u);
  for (std::size_t i = perm.size(); i > 1; --i)
    std::swap(perm[i - 1], perm[std::size_t(rng.uniform_int(int(i)))]);

  ExperienceDataset shuffled = ds;
  for (std::size_t i = 0; i < perm.size(); ++i) shuffled.tuples[perm[i]] = ds.tuples[i];

  const auto idx_a = build_index(ds);
  const auto idx_b = build_index(shuffled);
  for (int trial = 0; trial < 50; ++trial) {
    const auto q = random_query(rng, 3);
    const int a = rng.uniform_int(2);
    const auto na = knn_query(idx_a, q, a, 5);
    const auto nb = knn_query(idx_b, q, a, 5);
    for (std::size_t j = 0; j < na.indices.size(); ++j) {
      CHECK(perm[na.indices[j]] == nb.indices[j]);
      CHECK(na.distances[j] == nb.distances[j]);
    }
  }
}

TEST_CASE("state-level distances lower-bound per-action distances elementwise") {
  const auto ds = oracles::random_dataset(55, 300, 4, 3, 0.1);
  const auto idx = build_index(ds);
  SeededRng rng(56);
  for (int trial = 0; trial < 50; ++trial) {
    const auto q = random_query(rng, 4);
    const auto gs = knn_query_state(idx, q, 8);
    for (int a = 0; a < 3; ++a) {
      const auto ns = knn_query(idx, q, a, 8);
      for (std::size_t j = 0; j < 8; ++j) CHECK(ns.distances[j] >= gs.distances[j]);
    }
  }
}

TEST_CASE("identical queries return identical neighbor sets") {
  const auto ds = oracles::random_dataset(77, 150, 3, 2, 0.2);
  const auto idx = build_index(ds);
  SeededRng rng(78);
  const auto q = random_query(rng, 3);
  const auto a = knn_query(idx, q, 1, 7);
  const auto b = knn_query(idx, q, 1, 7);
  CHECK(a.indices == b.indices);
  CHECK(a.distances == b.distances);
}

TEST_CASE("distances are sorted, finite, and non-negative") {
  const auto ds = oracles::random_dataset(88, 200, 3, 2, 0.3);
  const auto idx = build_index(ds);
  SeededRng rng(89);
  for (int trial = 0; trial < 40; ++trial) {
    const auto ns = knn_query(idx, random_query(rng, 3), rng.uniform_int(2), 9);
    CHECK(std::is_sorted(ns.distances.begin(), ns.distances.end()));
    for (double d : ns.distances) {
      CHECK(d >= 0.0);
      CHECK(std::isfinite(d));
    }
  }
}
