#pragma once

#include <cstddef>
#include <functional>

namespace vqrng {

// Worker count used by every parallel loop in the library. 0 restores the
// default (hardware concurrency). Results never depend on this value: work is
// always partitioned on a fixed grid and assembled in index order.
void set_thread_count(unsigned n);
unsigned thread_count();

// Calls task(i) for every i in [0, count), spread over the worker pool.
// Exceptions thrown by a task are rethrown on the calling thread (first one
// wins, by index).
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& task);

}  // namespace vqrng
