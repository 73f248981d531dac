#pragma once
#include <cstdint>
#include <functional>

namespace gyre {

// Deterministic data-parallel helper. Work is split into contiguous index
// ranges with disjoint outputs, so results are bit-identical for any worker
// count, including 1. Nothing here may be used for reductions.
class ThreadPool {
public:
    explicit ThreadPool(int threads);
    ~ThreadPool();
    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    int size() const { return threads_; }

    // Calls fn(i0, i1) on [0, n) split into at most size() contiguous ranges.
    // The calling thread participates. Blocks until all ranges finish.
    void run(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

private:
    struct Impl;
    Impl* impl_;
    int threads_;
};

// Process-wide worker budget. Default: min(hardware_concurrency, 4),
// overridable via the GYRE_THREADS environment variable or set_thread_budget.
// Changing the budget after first use of pool() has no effect.
int thread_budget();
void set_thread_budget(int n);

// Lazily constructed process-wide pool.
ThreadPool& pool();

inline void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
    pool().run(n, fn);
}

}  // namespace gyre
