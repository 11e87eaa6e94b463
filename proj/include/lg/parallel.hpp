#pragma once

#include <cstddef>
#include <functional>

namespace lg {

/// Worker count from LG_THREADS (default 1). Results must never depend on it.
int thread_count();

/// Runs body(i) for i in [0, n) across thread_count() workers. Callers write
/// into per-index slots and reduce serially afterwards.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace lg
