#pragma once

#include <cstddef>
#include <functional>

namespace sevo {

/// Worker count from the SEVO_WORKERS environment variable (default 1).
std::size_t default_workers();

/// Runs task(i) for i in [0, n_tasks) on up to `workers` threads.
///
/// Tasks are claimed dynamically, so callers must write results into
/// per-task slots and reduce them afterwards in task order; that keeps
/// outputs independent of the worker count.
void parallel_for(std::size_t n_tasks, std::size_t workers,
                  const std::function<void(std::size_t)>& task);

}  // namespace sevo
