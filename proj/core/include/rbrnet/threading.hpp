#pragma once

#include <cstddef>
#include <functional>

namespace rbrnet {

/// Worker cap: min(hardware_concurrency, RBRNET_THREADS) with a floor of 1.
/// Read once at first use.
std::size_t worker_count();

/// Run fn(begin, end) over contiguous chunks of [0, n) on up to worker_count()
/// threads. Chunk boundaries depend only on n and the worker cap, and callers
/// must write disjoint outputs, so results are independent of scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace rbrnet
