#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace boltzalbedo {

/// Runs fn(i) for i in [0, n) on up to `threads` workers with static contiguous blocks.
/// Each index is processed exactly once by one worker, so results written per index
/// do not depend on the thread count.
template <class F>
void parallel_for(std::size_t n, int threads, F&& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1, threads), std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t block = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        const std::size_t lo = w * block, hi = std::min(n, lo + block);
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace boltzalbedo
