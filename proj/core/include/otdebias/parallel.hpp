#pragma once

#include <cstddef>
#include <functional>

namespace otdebias {

/// Process-wide cap on worker threads (the CLI's --threads). 0 means hardware concurrency.
void set_max_threads(std::size_t n);
std::size_t max_threads();

/// Runs body(i) for i in [0, n), statically partitioned over at most max_threads() workers.
/// Each index writes its own output slot, so results never depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace otdebias
