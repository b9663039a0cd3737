#pragma once

#include <functional>

namespace envmix {

/// Worker count: ENVMIX_THREADS if set and positive, otherwise
/// std::thread::hardware_concurrency().
int thread_count();

/// Runs task(i) for i in [0, count). Tasks must write only to slots they own;
/// the first exception thrown by any task is rethrown after all workers join.
/// Calls made from inside a task run serially on the calling worker.
void parallel_for(int count, const std::function<void(int)>& task);

}  // namespace envmix
