#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pmn {

/// Runs fn(task, worker) for task in [0, count) on up to `threads` workers.
/// Tasks are claimed in ascending order; if any throw, the exception of the
/// lowest failing task is rethrown after all workers stop.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i, std::size_t{0});
        return;
    }
    const std::size_t workers = threads < count ? threads : count;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex mutex;
    std::size_t failed_task = count;
    std::exception_ptr error;
    auto body = [&](std::size_t worker) {
        for (;;) {
            const std::size_t task = next.fetch_add(1);
            if (task >= count || failed.load()) return;
            try {
                fn(task, worker);
            } catch (...) {
                std::lock_guard lock(mutex);
                if (task < failed_task) {
                    failed_task = task;
                    error = std::current_exception();
                }
                failed.store(true);
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body, w);
    body(0);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace pmn
