#pragma once

#include <cstdint>
#include <functional>

namespace gentract::nd {

/// Worker count: GENTRACT_THREADS if set (clamped to [1, 64]), otherwise
/// hardware concurrency. Read once per process.
int worker_count();

/// Runs fn over [0, n) split into contiguous per-worker ranges. Each index
/// is processed by exactly one worker, so writes to disjoint outputs are
/// race-free and results are independent of the worker count. Calls from
/// inside a worker fall back to serial execution.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace gentract::nd
