#pragma once

#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "stein/errors.hpp"

namespace stein {

// Worker count: STEIN_DENSITY_THREADS if set, else hardware concurrency.
inline int default_worker_count() {
    if (const char* env = std::getenv("STEIN_DENSITY_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && v >= 1 && v <= 4096) return static_cast<int>(v);
        throw domain_error("STEIN_DENSITY_THREADS must be an integer in [1,4096]");
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(begin, end) over a contiguous split of [0, n). Work is partitioned
// by index only, so any per-index output is identical for every worker count.
// The lowest-index exception wins, matching single-threaded behaviour.
template <class Fn>
void parallel_for(std::size_t n, int workers, const Fn& fn) {
    if (n == 0) return;
    workers = std::max(1, workers);
    if (static_cast<std::size_t>(workers) > n) workers = static_cast<int>(n);
    if (workers == 1) {
        fn(std::size_t{0}, n);
        return;
    }
    std::mutex mu;
    std::exception_ptr first_error;
    std::size_t first_error_begin = n;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    const std::size_t chunk = (n + static_cast<std::size_t>(workers) - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const std::size_t begin = static_cast<std::size_t>(w) * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, begin, end] {
            try {
                fn(begin, end);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (begin < first_error_begin) {
                    first_error_begin = begin;
                    first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace stein
