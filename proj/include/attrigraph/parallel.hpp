#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace attrigraph {

/// Splits [0, n) into `workers` contiguous chunks and runs
/// fn(worker, begin, end) for each on its own thread. Chunk boundaries
/// depend only on (n, workers). The first exception thrown by any worker
/// is rethrown after all threads join.
template <class F>
void parallel_chunks(std::size_t n, std::size_t workers, F&& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, std::max<std::size_t>(n, 1)));
    if (workers == 1) {
        fn(std::size_t{0}, std::size_t{0}, n);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    const std::size_t base = n / workers;
    const std::size_t extra = n % workers;
    std::size_t begin = 0;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t end = begin + base + (w < extra ? 1 : 0);
        threads.emplace_back([&, w, begin, end] {
            try {
                fn(w, begin, end);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
        begin = end;
    }
    for (auto& t : threads) t.join();
    if (failure) std::rethrow_exception(failure);
}

/// Number of chunks parallel_chunks will actually use.
inline std::size_t effective_workers(std::size_t n, std::size_t workers) {
    return std::max<std::size_t>(1, std::min(workers, std::max<std::size_t>(n, 1)));
}

}  // namespace attrigraph
