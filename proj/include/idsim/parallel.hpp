#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace idsim {

// Splits [0, n) into contiguous ranges, one per worker. Callers key their
// randomness by index, so results do not depend on the partition.
template <class F>
void parallel_ranges(long long n, int workers, F&& f) {
    const int w = static_cast<int>(std::min<long long>(std::max(workers, 1), std::max<long long>(n, 1)));
    if (w <= 1) {
        f(0, 0LL, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(w);
    const long long chunk = (n + w - 1) / w;
    for (int i = 0; i < w; ++i) {
        const long long begin = i * chunk;
        const long long end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&f, i, begin, end] { f(i, begin, end); });
    }
    for (auto& t : pool) t.join();
}

} // namespace idsim
