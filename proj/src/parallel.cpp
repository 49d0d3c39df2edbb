#include "gbsde/parallel.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>
#include <vector>

namespace gbsde {

namespace {
std::atomic<int> g_threads{0};  // 0: decide from hardware
}

void set_thread_count(int threads) { g_threads.store(threads); }

int thread_count() {
    int t = g_threads.load();
    if (t > 0) return t;
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_for(long n, const std::function<void(long)>& body) {
    const int workers = std::min<long>(thread_count(), n) > 1 ? std::min<long>(thread_count(), n)
                                                              : 1;
    if (workers == 1) {
        for (long i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    for (int w = 0; w < workers; ++w) {
        long lo = n * w / workers;
        long hi = n * (w + 1) / workers;
        pool.emplace_back([&, lo, hi]() {
            try {
                for (long i = lo; i < hi; ++i) {
                    if (failed.load(std::memory_order_relaxed)) return;
                    body(i);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!failed.exchange(true)) error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

double pairwise_sum(const double* data, long n) {
    if (n <= 8) {
        double s = 0.0;
        for (long i = 0; i < n; ++i) s += data[i];
        return s;
    }
    long half = n / 2;
    return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

double pairwise_sum(const Array& v) { return pairwise_sum(v.data(), v.size()); }

MeanStdErr mean_stderr(const Array& values) {
    MeanStdErr r;
    r.count = values.size();
    if (r.count == 0) return r;
    r.mean = pairwise_sum(values) / static_cast<double>(r.count);
    if (r.count > 1) {
        Array dev = (values - r.mean).square();
        double var = pairwise_sum(dev) / static_cast<double>(r.count - 1);
        r.std_error = std::sqrt(var / static_cast<double>(r.count));
    }
    return r;
}

}  // namespace gbsde
