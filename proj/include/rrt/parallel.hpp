#pragma once
//
// Minimal replica-parallel loop. Work is handed out in chunks from an atomic
// counter; callers write into per-index slots and reduce afterwards in index
// order, so results do not depend on the thread count.
//

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rrt {

// 0 means "use hardware concurrency".
inline unsigned resolve_threads(unsigned requested)
{
    if (requested != 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& body, std::size_t chunk = 0)
{
    threads = std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(n, 1));
    if (chunk == 0) chunk = std::max<std::size_t>(1, n / (16 * threads));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t begin = next.fetch_add(chunk);
            if (begin >= n) return;
            const std::size_t end = std::min(n, begin + chunk);
            try {
                for (std::size_t i = begin; i < end; ++i) body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads - 1);
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

} // namespace rrt
