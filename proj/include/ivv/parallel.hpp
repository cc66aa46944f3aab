#pragma once

#include <cstddef>
#include <functional>

namespace ivv {

/// Number of workers to use: `requested` if positive, else hardware concurrency.
int resolve_threads(int requested);

/// Runs fn(i) for i in [0, n) on up to `threads` workers. The first exception
/// (by index) is rethrown after all workers finish.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace ivv
