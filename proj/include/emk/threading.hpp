#pragma once

#include <cstddef>
#include <functional>

namespace emk {

// Worker cap for batch operations: EMK_THREADS when set (minimum 1),
// otherwise the hardware concurrency.
int thread_cap();

// Runs fn(i) for i in [0, count) across up to thread_cap() workers. Each
// index is processed exactly once; callers write to per-index slots, so the
// result does not depend on the schedule.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

} // namespace emk
