#pragma once

#include <cstddef>
#include <thread>
#include <utility>
#include <vector>

namespace bvc {

// Runs fn(chunk, begin, end) over a contiguous partition of [0, n).
// The partition depends on the worker count, so callers must combine
// per-chunk results either order-independently (integer sums, min/max) or by
// concatenating in chunk order; index order is then preserved for any
// worker count.
template <typename Fn>
void for_chunks(std::size_t n, unsigned threads, Fn&& fn) {
    if (n == 0) return;
    if (threads <= 1 || n < 2 * threads) {
        fn(0u, std::size_t{0}, n);
        return;
    }
    const std::size_t per = (n + threads - 1) / threads;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned c = 0; c < threads; ++c) {
        const std::size_t begin = static_cast<std::size_t>(c) * per;
        if (begin >= n) break;
        const std::size_t end = begin + per < n ? begin + per : n;
        pool.emplace_back([&fn, c, begin, end] { fn(c, begin, end); });
    }
    for (auto& t : pool) t.join();
}

} // namespace bvc
