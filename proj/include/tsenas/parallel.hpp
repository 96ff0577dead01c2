#pragma once

#include <cstddef>
#include <functional>

namespace tsenas {

/// Runs fn(i) for i in [0, n) on at most `jobs` threads (0 means 1).
/// Callers write results into pre-sized slots keyed by i, so output never
/// depends on scheduling. If any call throws, the exception from the lowest
/// failing index is rethrown after all workers stop.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn);

}  // namespace tsenas
