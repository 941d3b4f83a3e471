#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace committee_audit {

/// Worker cap: COMMITTEEAUDIT_THREADS when set to a positive integer, else the hardware count.
inline std::size_t thread_limit() {
    if (const char* env = std::getenv("COMMITTEEAUDIT_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, n). Each index is visited exactly once and callers write only to
/// slots owned by i, so results do not depend on the schedule. The first exception thrown by any
/// worker is rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const std::size_t workers = std::min(thread_limit(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }

    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < n; i += workers) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                        return;
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

} // namespace committee_audit
