#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace lgc {

/// Process-wide worker count for data-parallel loops. 0 means "hardware".
inline int& thread_count_ref() {
    static int n = 0;
    return n;
}

inline void set_thread_count(int n) { thread_count_ref() = n; }

inline int effective_threads() {
    int n = thread_count_ref();
    if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
    return std::max(1, n);
}

/// Static-chunked parallel loop over [0, n). Each index is processed exactly
/// once by exactly one worker, so loops whose iterations write disjoint
/// outputs are deterministic regardless of the worker count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    const int workers = std::min<std::size_t>(effective_threads(), n == 0 ? 1 : n);
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            const std::size_t lo = n * w / workers;
            const std::size_t hi = n * (w + 1) / workers;
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace lgc
