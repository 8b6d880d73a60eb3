#pragma once

#include <cstddef>
#include <functional>

namespace pvae {

// Worker cap: PVAE_THREADS when set to a positive integer, else the hardware
// concurrency (at least 1).
int worker_count();

// Runs fn(0) .. fn(n-1), possibly concurrently. The first exception thrown by
// any task is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace pvae
