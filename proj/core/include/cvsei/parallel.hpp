#pragma once

#include <cstddef>
#include <functional>

namespace cvsei {

// Process-wide worker cap (the CLI's --threads). 0 means hardware default.
void set_max_threads(int n);
int max_threads();

// Runs fn(i) for every i in [0, n). Each index must write only to its own
// output slot; all cross-index reductions happen afterwards in index order,
// which keeps results byte-identical for any thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace cvsei
