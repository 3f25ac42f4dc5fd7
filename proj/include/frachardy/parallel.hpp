#pragma once

#include <functional>

namespace frachardy {

/// Worker count: FRACHARDY_THREADS if set to a positive integer, else the hardware concurrency.
int thread_count();

/// Runs body(i) once for each i in [0, n). Callers that write results into per-index slots
/// get output independent of the thread count. The first exception is rethrown.
void parallel_for(int n, const std::function<void(int)>& body);

} // namespace frachardy
