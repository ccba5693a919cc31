#include "sevo/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace sevo {

std::size_t default_workers()
{
    const char* env = std::getenv("SEVO_WORKERS");
    if (env == nullptr || *env == '\0') {
        return 1;
    }
    try {
        const long value = std::stol(env);
        return value > 0 ? static_cast<std::size_t>(value) : 1;
    } catch (const std::exception&) {
        return 1;
    }
}

void parallel_for(std::size_t n_tasks, std::size_t workers,
                  const std::function<void(std::size_t)>& task)
{
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n_tasks, 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < n_tasks; ++i) {
            task(i);
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n_tasks) {
                return;
            }
            try {
                task(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                next.store(n_tasks);
                return;
            }
        }
    };

    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) {
        pool.emplace_back(worker);
    }
    worker();
    pool.clear();
    if (failure) {
        std::rethrow_exception(failure);
    }
}

}  // namespace sevo
