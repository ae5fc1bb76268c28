#pragma once

#include <cstddef>
#include <functional>

namespace bridgekit {

// Worker count: std::thread::hardware_concurrency(), capped by the
// BRIDGEKIT_THREADS environment variable when it is set to a positive integer.
std::size_t worker_count();

// Runs fn(i) for i in [0, n). Each index is handled by exactly one worker, so
// callers that write only to index-owned slots get results independent of the
// thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace bridgekit
