#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace qmri {

/// Worker count: hardware concurrency capped by the QMRI_THREADS env var.
inline int worker_count() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    if (const char* env = std::getenv("QMRI_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1) n = std::min(n, cap);
    }
    return n;
}

/// Runs fn(begin, end) over disjoint chunks of [0, count). Chunking is fixed by
/// count alone, so per-chunk results can be combined in a deterministic order
/// regardless of how many workers actually run.
inline void parallel_chunks(std::size_t count, const std::function<void(std::size_t, std::size_t)>& fn) {
    const int workers = worker_count();
    if (workers <= 1 || count < 2) {
        fn(0, count);
        return;
    }
    const std::size_t chunks = std::min<std::size_t>(workers, count);
    const std::size_t step = (count + chunks - 1) / chunks;
    std::vector<std::thread> pool;
    pool.reserve(chunks);
    for (std::size_t c = 0; c < chunks; ++c) {
        const std::size_t b = c * step;
        const std::size_t e = std::min(count, b + step);
        if (b >= e) break;
        pool.emplace_back(fn, b, e);
    }
    for (auto& t : pool) t.join();
}

}  // namespace qmri
