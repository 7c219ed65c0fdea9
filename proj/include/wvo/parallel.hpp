#pragma once

#include <cstddef>
#include <functional>

namespace wvo {

/// Worker count: WVO_THREADS when set to a positive integer, else hardware concurrency.
std::size_t thread_count();

/// Calls fn(i) for i in [0, n). Each index must write only its own output slot, which keeps
/// results independent of the thread count. The first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace wvo
