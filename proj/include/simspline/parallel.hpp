#pragma once
#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace simspline {

inline int resolve_thread_count(int requested) {
    if (requested > 0) return requested;
    unsigned hc = std::thread::hardware_concurrency();
    return hc ? (int)hc : 1;
}

// Run fn(i) for i in [0, count); work items must write only to their own
// slots so the result is independent of scheduling.
inline void parallel_for(int count, int threads,
                         const std::function<void(int)>& fn) {
    int nt = std::min(resolve_thread_count(threads), count);
    if (nt <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            int i = next.fetch_add(1);
            if (i >= count) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

} // namespace simspline
