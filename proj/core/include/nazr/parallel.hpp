#pragma once

#include <cstddef>
#include <functional>

namespace nazr {

// Worker cap: NAZR_THREADS when set to a positive integer, otherwise the
// hardware concurrency (at least 1).
std::size_t worker_count();

// Runs body(i) for i in [0, n). Indices are split into contiguous chunks, one
// per worker. Callers write results by index, so output never depends on the
// worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace nazr
