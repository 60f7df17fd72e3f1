#pragma once

#include <cstddef>
#include <functional>

namespace qednet {

// Number of workers to use when the caller passes 0 (hardware concurrency,
// at least 1).
int default_workers();

// Run fn(i) for i in [0, n). Writes from different indices must be disjoint;
// under that contract the result is bit-identical for any worker count.
void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t)>& fn);

// Run fn(begin, end, chunk) over a fixed partition of [0, n) into n_chunks
// contiguous chunks. The partition depends only on n and n_chunks, never on
// the worker count, so per-chunk partial results merged in chunk order give
// a reduction whose floating-point order is reproducible.
void parallel_chunks(std::size_t n, int workers, std::size_t n_chunks,
                     const std::function<void(std::size_t, std::size_t,
                                              std::size_t)>& fn);

}  // namespace qednet
