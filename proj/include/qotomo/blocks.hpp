#pragma once

// Worker pool over independent blocks. Block b always draws from
// RngStream(master_seed, b) and results come back in block order, so the
// reduction is identical for any thread count.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qotomo {

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

/// Runs make_worker() once per thread and worker(b) for every block b;
/// returns the per-block results indexed by block.
template <class MakeWorker>
auto run_blocks(std::size_t blocks, unsigned threads, MakeWorker make_worker) {
  using Worker = decltype(make_worker());
  using Result = decltype(std::declval<Worker&>()(std::size_t{0}));
  std::vector<Result> results(blocks);
  threads = std::max(1u, std::min<unsigned>(resolve_threads(threads), static_cast<unsigned>(std::max<std::size_t>(blocks, 1))));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    try {
      Worker worker = make_worker();
      for (std::size_t b = next++; b < blocks; b = next++) results[b] = worker(b);
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = blocks;
    }
  };
  if (threads == 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(body);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

} // namespace qotomo
