#pragma once

#include <cstddef>
#include <functional>

namespace lseg {

// Worker cap: min(LSEG_THREADS, hardware concurrency); at least 1.
int max_workers();

// Runs fn(begin, end) over contiguous chunks of [0, n). Chunk boundaries
// depend only on n and the worker cap, and workers write disjoint ranges,
// so results are schedule-independent.
void parallel_for(size_t n, const std::function<void(size_t, size_t)>& fn);

}  // namespace lseg
