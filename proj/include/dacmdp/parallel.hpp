#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace dacmdp {

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

// Runs body(begin, end, worker) over contiguous blocks of [0, n). The block
// partition depends only on (n, threads), so per-worker partial results can
// be reduced in a fixed order.
template <typename Body>
void parallel_for_blocks(std::size_t n, unsigned threads, Body&& body) {
  threads = std::max(1u, threads);
  if (threads == 1 || n < 2) {
    if (n > 0) body(std::size_t(0), n, 0u);
    return;
  }
  const unsigned workers = unsigned(std::min<std::size_t>(threads, n));
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = std::size_t(w) * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end, w] { body(begin, end, w); });
  }
  for (auto& t : pool) t.join();
}

} // namespace dacmdp
