#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace hetreg {

inline int hardware_threads() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

namespace detail {
inline thread_local bool inside_parallel_region = false;
}

/// Run fn(i) for i in [0, count) on up to `threads` workers (0 = hardware).
/// Tasks are pulled from a shared counter, so results must be written to
/// per-index slots by the caller. Nested calls degrade to serial execution.
/// The first exception thrown by any task is rethrown on the caller.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
    if (count == 0) return;
    int nthreads = threads <= 0 ? hardware_threads() : threads;
    nthreads = static_cast<int>(
        std::min<std::size_t>(static_cast<std::size_t>(nthreads), count));
    if (nthreads <= 1 || detail::inside_parallel_region) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&]() {
        detail::inside_parallel_region = true;
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) break;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
        detail::inside_parallel_region = false;
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nthreads - 1));
    for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace hetreg
