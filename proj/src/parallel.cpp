#include "mrom/parallel.hpp"

#include "mrom/errors.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mrom {

namespace {

std::atomic<int> g_max_threads{0}; // 0: resolve from hardware at call time

int resolved_max_threads() {
    const int n = g_max_threads.load();
    if (n > 0)
        return n;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

} // namespace

int max_threads() { return resolved_max_threads(); }

void set_max_threads(int n) {
    if (n < 0)
        throw ContractError("set_max_threads: thread count must be >= 0");
    g_max_threads.store(n);
}

void parallel_for(int n, const std::function<void(int)>& f) {
    if (n <= 0)
        return;
    const int workers = std::min(n, resolved_max_threads());
    if (workers <= 1) {
        for (int i = 0; i < n; ++i)
            f(i);
        return;
    }

    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        const int lo = static_cast<int>(static_cast<long>(n) * w / workers);
        const int hi = static_cast<int>(static_cast<long>(n) * (w + 1) / workers);
        pool.emplace_back([&, lo, hi]() {
            for (int i = lo; i < hi; ++i) {
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error)
                        first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (std::thread& t : pool)
        t.join();
    if (first_error)
        std::rethrow_exception(first_error);
}

} // namespace mrom
