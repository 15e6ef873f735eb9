#pragma once

#include <algorithm>
#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace stratboot::detail {

// Runs fn(i) for i in [0, n). Tasks write only to their own output slot and
// must not throw, so results are identical for any worker count.
inline void parallel_for(long n, int workers, const std::function<void(long)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<long> next{0};
  auto drain = [&] {
    for (;;) {
      long i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n) break;
      fn(i);
    }
  };
  int k = static_cast<int>(std::min<long>(workers, n));
  std::vector<std::thread> pool;
  pool.reserve(k);
  for (int t = 0; t < k; ++t) pool.emplace_back(drain);
  for (auto& th : pool) th.join();
}

}  // namespace stratboot::detail
