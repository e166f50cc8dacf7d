#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace pwinv {

/// Worker count from PWINV_THREADS (default 1). Throws std::invalid_argument
/// for anything but a positive integer.
int thread_count();

/// Runs fn(i) for i in [0, n) over contiguous chunks, one per worker. Each
/// index writes only its own slot, so results do not depend on the worker
/// count. The exception of the lowest failing chunk is rethrown.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, int workers = thread_count()) {
  const std::size_t w = std::min<std::size_t>(std::size_t(std::max(workers, 1)), std::max<std::size_t>(n, 1));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(w);
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + w - 1) / w;
  for (std::size_t t = 0; t < w; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t * chunk; i < std::min(n, (t + 1) * chunk); ++i) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace pwinv
