#pragma once

#include <cstddef>
#include <functional>

namespace htol {

// Default worker count: HTOL_THREADS if set, else hardware concurrency.
int default_threads();

// Runs body(i) for i in [0,n) on up to `threads` workers. Results must be
// written by index so the outcome does not depend on scheduling.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

}  // namespace htol
