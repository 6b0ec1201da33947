#pragma once

#include <cstddef>
#include <functional>

namespace agentloop {

// Runs fn(i) for i in [0, count) across up to `threads` worker threads.
// Work is keyed by index, so results stored per-index are identical for any
// thread count. threads <= 1 runs inline. Exceptions from workers are
// rethrown on the calling thread (first one wins).
void parallel_for(size_t count, int threads, const std::function<void(size_t)>& fn);

// 0 means auto (hardware concurrency capped at 8).
int resolve_thread_count(int configured);

}  // namespace agentloop
