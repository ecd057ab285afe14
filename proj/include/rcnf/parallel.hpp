#pragma once

#include <cstddef>
#include <functional>

namespace rcnf {

/// Worker count from RCNF_THREADS, else hardware concurrency (at least 1).
std::size_t thread_count();

/// Runs body(i) for i in [0, n). Every index is processed exactly once; callers
/// must only write to per-index state so the schedule cannot change results.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace rcnf
