#include "gyre/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

namespace gyre {

struct ThreadPool::Impl {
    std::mutex mu;
    std::condition_variable cv;
    std::vector<std::thread> workers;
    std::atomic<uint64_t> epoch{0};
    std::atomic<int> pending{0};
    bool stopping = false;

    // current job
    const std::function<void(int64_t, int64_t)>* fn = nullptr;
    int64_t n = 0;
    int parts = 1;

    void worker_loop(int index);

    void run_chunk(int index) {
        const int64_t chunk = (n + parts - 1) / parts;
        const int64_t i0 = index * chunk;
        const int64_t i1 = std::min<int64_t>(n, i0 + chunk);
        if (i0 < i1) (*fn)(i0, i1);
    }
};

ThreadPool::ThreadPool(int threads) : impl_(new Impl), threads_(threads < 1 ? 1 : threads) {
    for (int i = 1; i < threads_; ++i)
        impl_->workers.emplace_back([this, i] { impl_->worker_loop(i); });
}

ThreadPool::~ThreadPool() {
    {
        std::lock_guard<std::mutex> lk(impl_->mu);
        impl_->stopping = true;
    }
    impl_->cv.notify_all();
    for (auto& w : impl_->workers) w.join();
    delete impl_;
}

namespace {
thread_local int t_nesting = 0;
}

void ThreadPool::Impl::worker_loop(int index) {
    uint64_t seen = 0;
    for (;;) {
        {
            std::unique_lock<std::mutex> lk(mu);
            cv.wait(lk, [&] { return stopping || epoch.load() != seen; });
            if (stopping) return;
            seen = epoch.load();
        }
        t_nesting += 1;
        run_chunk(index);
        t_nesting -= 1;
        pending.fetch_sub(1, std::memory_order_acq_rel);
    }
}

void ThreadPool::run(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
    if (n <= 0) return;
    // nested or single-threaded regions run inline; splitting does not change
    // results, it only changes who computes which range
    if (threads_ == 1 || n == 1 || t_nesting > 0) {
        fn(0, n);
        return;
    }
    impl_->fn = &fn;
    impl_->n = n;
    impl_->parts = threads_;
    impl_->pending.store(threads_ - 1, std::memory_order_release);
    {
        std::lock_guard<std::mutex> lk(impl_->mu);
        impl_->epoch.fetch_add(1, std::memory_order_acq_rel);
    }
    impl_->cv.notify_all();
    t_nesting += 1;
    impl_->run_chunk(0);  // caller takes the first range
    t_nesting -= 1;
    while (impl_->pending.load(std::memory_order_acquire) != 0) {
        // short spin; jobs are sized in the hundreds of microseconds
    }
    impl_->fn = nullptr;
}

static int resolve_budget() {
    if (const char* env = std::getenv("GYRE_THREADS")) {
        int v = std::atoi(env);
        if (v >= 1) return v;
    }
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    return static_cast<int>(hw < 4 ? hw : 4);
}

static int g_budget = 0;

int thread_budget() {
    if (g_budget == 0) g_budget = resolve_budget();
    return g_budget;
}

void set_thread_budget(int n) { g_budget = n < 1 ? 1 : n; }

ThreadPool& pool() {
    static std::mutex mu;
    static std::map<int, std::unique_ptr<ThreadPool>> pools;
    const int budget = thread_budget();
    std::lock_guard<std::mutex> lk(mu);
    auto& p = pools[budget];
    if (!p) p.reset(new ThreadPool(budget));
    return *p;
}

}  // namespace gyre
