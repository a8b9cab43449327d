#pragma once

#include <cstddef>
#include <functional>

namespace colarec {

/// Worker count: hardware concurrency, capped by COLAREC_THREADS when set.
std::size_t worker_threads();

/// Runs fn(i) for i in [0, n) over contiguous chunks. Callers write results
/// into per-index slots, so output never depends on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t threads = 0);

}  // namespace colarec
