#pragma once

#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace kqsd {

// Static-partition fork/join helper.  Work item i is always processed by the
// worker owning its contiguous range, and reductions are left to the caller,
// so results never depend on the number of threads.
class ThreadPool {
  public:
    explicit ThreadPool(unsigned threads) {
        if (threads == 0) threads = std::thread::hardware_concurrency();
        if (threads == 0) threads = 1;
        n_threads_ = threads;
    }

    unsigned size() const { return n_threads_; }

    void parallel_for(std::uint64_t n, const std::function<void(std::uint64_t, std::uint64_t)>& body) const {
        if (n == 0) return;
        const std::uint64_t workers = std::min<std::uint64_t>(n_threads_, n);
        if (workers <= 1) {
            body(0, n);
            return;
        }
        std::vector<std::thread> pool;
        pool.reserve(workers - 1);
        const std::uint64_t chunk = (n + workers - 1) / workers;
        std::exception_ptr first_error;
        std::mutex error_mutex;
        auto guarded = [&](std::uint64_t lo, std::uint64_t hi) {
            try {
                body(lo, hi);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        };
        for (std::uint64_t w = 1; w < workers; ++w) {
            const std::uint64_t lo = w * chunk;
            const std::uint64_t hi = std::min(n, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back([&guarded, lo, hi] { guarded(lo, hi); });
        }
        guarded(0, std::min(n, chunk));
        for (auto& th : pool) th.join();
        if (first_error) std::rethrow_exception(first_error);
    }

  private:
    unsigned n_threads_ = 1;
};

}  // namespace kqsd
