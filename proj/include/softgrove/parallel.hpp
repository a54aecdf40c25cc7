#pragma once

#include <cstddef>
#include <functional>

namespace softgrove {

// SOFTGROVE_THREADS when set to a positive integer, else hardware concurrency.
std::size_t worker_count();

// Runs fn(0..n-1) on up to `workers` threads. Each index runs exactly once;
// if any call throws, the exception of the lowest failing index is rethrown
// after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t workers = worker_count());

}  // namespace softgrove
