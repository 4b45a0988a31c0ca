#pragma once

#include <cstddef>
#include <functional>

namespace glgmix {

// Worker count: GLGMIX_THREADS if set and positive, else the hardware
// concurrency (at least 1).
unsigned worker_count();

// Calls body(i) for i in [0, n), spread across worker threads when n is at
// least min_parallel. body must only write to storage owned by index i.
// The first exception thrown by any worker is rethrown after all join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, std::size_t min_parallel = 64);

}  // namespace glgmix
