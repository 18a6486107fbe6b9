#pragma once

#include <cstddef>
#include <functional>

namespace jtanet {

/// Worker count: JTANET_THREADS if set and positive, else hardware concurrency.
std::size_t thread_count();

/// Runs fn(i) for i in [0, n). Work is split into contiguous blocks; callers that
/// reduce must do so per index and combine afterwards in index order.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

/// Keeps large activation buffers on the heap between iterations instead of
/// mapping and unmapping them each time (glibc only; no-op elsewhere).
void configure_allocator();

}  // namespace jtanet
