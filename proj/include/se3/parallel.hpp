#pragma once

#include <cstddef>
#include <functional>

namespace se3 {

/// Worker cap used by parallel_for. Initialized from SE3_THREADS, else hardware concurrency.
int thread_count();
void set_thread_count(int n);

/// Runs body(begin, end) over a static partition of [0, n). Chunk boundaries depend only on
/// n and the worker count, and chunks never share output, so results are schedule-independent.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                  std::size_t min_chunk = 1024);

}  // namespace se3
