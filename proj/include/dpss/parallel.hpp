#pragma once

#include <cstddef>
#include <functional>

namespace dpss {

// Worker count: DPSS_THREADS if set and positive, else the hardware count.
std::size_t thread_count();

// Runs body(i) for i in [0, n) across thread_count() workers. Each index is
// visited exactly once; callers reduce results in index order afterwards so
// the outcome never depends on scheduling. The first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace dpss
