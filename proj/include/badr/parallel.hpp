#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

#include "badr/core.hpp"

namespace badr {

// Calls f(i) for i in [0, n) on up to `threads` workers. Each index runs exactly
// once; the first exception thrown by any call is rethrown after all workers join.
template <typename F>
void parallel_for(Index n, unsigned threads, F&& f) {
  const unsigned workers = static_cast<unsigned>(std::min<Index>(std::max(1u, threads), n));
  if (workers <= 1) {
    for (Index i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<Index> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto work = [&] {
    for (Index i; (i = next.fetch_add(1)) < n && !failed.load();) {
      try {
        f(i);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned k = 0; k < workers; ++k) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace badr
