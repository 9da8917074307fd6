#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace bps {

/// Chunked parallel loop over [0, n). `fn(begin, end)` must only write to
/// disjoint slots, which keeps results independent of the thread count.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  if (n == 0) return;
  const std::size_t hw = threads > 0 ? static_cast<std::size_t>(threads) : 1;
  const std::size_t workers = std::min<std::size_t>(hw, n);
  if (workers <= 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& th : pool) th.join();
}

inline int default_threads() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace bps
