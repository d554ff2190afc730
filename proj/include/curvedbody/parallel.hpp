#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace cb {

// Runs body(i) for i in [0, count) on up to `threads` workers with a strided split.
template <typename F>
void parallel_for(int count, int threads, F&& body) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (int i = t; i < count; i += threads) body(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace cb
