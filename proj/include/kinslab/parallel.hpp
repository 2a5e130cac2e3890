#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace kinslab {

/// Deterministic chunked parallel loop. Results must be written to disjoint
/// locations; chunk boundaries depend only on (n, nthreads), never on timing,
/// so reductions assembled per chunk and merged in index order are
/// reproducible across runs.
inline void parallel_for(std::size_t n, int nthreads,
                         const std::function<void(std::size_t, std::size_t)>& body) {
  if (nthreads <= 1 || n < 2) {
    body(0, n);
    return;
  }
  std::size_t nt = std::min<std::size_t>(nthreads, n);
  std::size_t chunk = (n + nt - 1) / nt;
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    std::size_t lo = t * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([=, &body] { body(lo, hi); });
  }
  for (auto& th : pool) th.join();
}

inline int default_threads() {
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace kinslab
