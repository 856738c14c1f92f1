#pragma once

#include <cstddef>
#include <functional>

namespace cmfg {

// Worker cap: CMFG_THREADS if set and positive, otherwise hardware
// concurrency (at least 1).
unsigned worker_count();

// Runs body(i) for i in [0, n) on up to worker_count() threads. Each index is
// processed exactly once; results must be written to disjoint slots.
// The first exception thrown by any body is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace cmfg
