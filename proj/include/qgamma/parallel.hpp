#pragma once

#include <cstddef>
#include <functional>

namespace qgamma {

// Global worker count used by batch evaluations. 1 disables threading.
void set_thread_count(unsigned count);
unsigned thread_count();

/// Runs body(i) for i in [0, count). Work is split into contiguous static
/// chunks, so any per-index output is independent of the thread count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace qgamma
