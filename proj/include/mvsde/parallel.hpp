#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace mvsde {

/// Runs body(begin, end) over contiguous chunks of [0, count).
/// Chunk boundaries only affect scheduling; callers must write disjoint outputs.
/// The first exception thrown by any worker is rethrown on the caller thread.
template <typename Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body,
                  std::size_t min_chunk = 64) {
  if (count == 0) return;
  const std::size_t max_workers = std::max<std::size_t>(1, count / std::max<std::size_t>(1, min_chunk));
  const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), max_workers);
  if (workers <= 1) {
    body(std::size_t{0}, count);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, w, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace mvsde
