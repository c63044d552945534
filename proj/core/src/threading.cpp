#include "rbrnet/threading.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace rbrnet {

std::size_t worker_count() {
    static const std::size_t cached = [] {
        std::size_t n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
        if (const char* env = std::getenv("RBRNET_THREADS")) {
            try {
                const long v = std::stol(env);
                if (v >= 1) n = std::min<std::size_t>(n, static_cast<std::size_t>(v));
            } catch (...) {
                // unparsable value: keep the hardware default
            }
        }
        return n;
    }();
    return cached;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t workers = std::min(worker_count(), n);
    if (workers <= 1) {
        fn(0, n);
        return;
    }
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
        const std::size_t begin = t * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& th : pool) th.join();
}

}  // namespace rbrnet
