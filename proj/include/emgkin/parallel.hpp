#pragma once

#include <cstddef>
#include <functional>

namespace emgkin {

/// Worker count used by parallel_for. Defaults to EMGKIN_THREADS, else 1.
std::size_t thread_count();
void set_thread_count(std::size_t n);

/// Runs body(begin, end) over contiguous chunks of [0, n). Chunk boundaries
/// depend only on n and the thread count, and callers never reduce across
/// chunks, so results are identical for any thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace emgkin
