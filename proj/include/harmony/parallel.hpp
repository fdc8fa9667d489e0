#pragma once

#include <cstddef>
#include <functional>

namespace harmony {

/// Upper bound on worker threads used by parallel_for. 0 means hardware concurrency.
void set_max_jobs(std::size_t jobs);
std::size_t max_jobs();

/// Runs body(i) for i in [0, n). Results must be written by index so output
/// is independent of scheduling. Calls made from inside a worker run
/// serially. The first exception (lowest index) is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace harmony
