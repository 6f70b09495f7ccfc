#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace fraccur {

// Thread count for parallel loops. Results never depend on it: work is split into
// fixed chunks, each index writes its own slot, and reductions run in index order.
class ParallelContext {
public:
    explicit ParallelContext(int threads = 0) : threads_(threads > 0 ? threads : from_env()) {}

    int threads() const { return threads_; }

    static int from_env() {
        if (const char* s = std::getenv("FRACCUR_THREADS")) {
            int t = std::atoi(s);
            if (t > 0) return t;
        }
        return 1;
    }

    static ParallelContext& global() {
        static ParallelContext ctx;
        return ctx;
    }
    static void set_global_threads(int t) { global() = ParallelContext(t); }

private:
    int threads_;
};

// Calls body(i) for i in [0, n). Exceptions from any worker are rethrown.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                         const ParallelContext& ctx = ParallelContext::global()) {
    const std::size_t t = std::min<std::size_t>(std::size_t(std::max(1, ctx.threads())), n);
    if (t <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::exception_ptr err;
    std::mutex mu;
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + t - 1) / t;
    for (std::size_t w = 0; w < t; ++w) {
        pool.emplace_back([&, w] {
            try {
                const std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> g(mu);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

// Pairwise summation; the order of additions depends only on v.size().
inline double tree_sum(const double* v, std::size_t n) {
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = 0;
        for (std::size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    const std::size_t h = n / 2;
    return tree_sum(v, h) + tree_sum(v + h, n - h);
}

inline double tree_sum(const std::vector<double>& v) { return tree_sum(v.data(), v.size()); }

} // namespace fraccur
