#pragma once

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace bpreg::detail {

inline unsigned resolve_workers(unsigned requested, int tasks) {
  unsigned w = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  return std::max(1u, std::min<unsigned>(w, static_cast<unsigned>(std::max(tasks, 1))));
}

// Runs body(i) for i in [0, count) on a pool of threads. Work items are
// claimed from a shared counter, so the caller must store results by index
// and not rely on execution order. body must not throw.
template <class Body>
void parallel_for(int count, unsigned workers, Body&& body) {
  const unsigned w = resolve_workers(workers, count);
  if (w == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (unsigned t = 0; t < w; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace bpreg::detail
