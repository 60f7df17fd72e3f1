#include "qednet/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

namespace qednet {

int default_workers() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

void parallel_chunks(std::size_t n, int workers, std::size_t n_chunks,
                     const std::function<void(std::size_t, std::size_t,
                                              std::size_t)>& fn) {
  if (n == 0) return;
  if (workers <= 0) workers = default_workers();
  n_chunks = std::max<std::size_t>(1, std::min(n_chunks, n));

  auto chunk_bounds = [n, n_chunks](std::size_t c) {
    // Even split with the remainder spread over the leading chunks.
    const std::size_t base = n / n_chunks, rem = n % n_chunks;
    const std::size_t begin = c * base + std::min<std::size_t>(c, rem);
    return std::pair<std::size_t, std::size_t>(
        begin, begin + base + (c < rem ? 1 : 0));
  };

  const std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(workers), n_chunks);
  if (n_threads <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) {
      auto [b, e] = chunk_bounds(c);
      fn(b, e, c);
    }
    return;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= n_chunks || failed.load(std::memory_order_relaxed)) return;
      try {
        auto [b, e] = chunk_bounds(c);
        fn(b, e, c);
      } catch (...) {
        std::scoped_lock lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(n_threads - 1);
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (workers <= 0) workers = default_workers();
  // Chunk granularity only affects scheduling; writes are index-disjoint.
  const std::size_t n_chunks =
      std::min<std::size_t>(n, static_cast<std::size_t>(workers) * 4);
  parallel_chunks(n, workers, n_chunks,
                  [&fn](std::size_t b, std::size_t e, std::size_t) {
                    for (std::size_t i = b; i < e; ++i) fn(i);
                  });
}

}  // namespace qednet
