#pragma once

#include <cstddef>
#include <functional>

namespace fscil {

/// Worker cap: FSCIL_FORGE_THREADS if set and positive, else hardware concurrency.
std::size_t worker_count();

/// Runs fn(i) for i in [0, n) across up to worker_count() threads. Each index
/// is visited exactly once; callers write results into slot i so the output
/// does not depend on scheduling. The first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace fscil
