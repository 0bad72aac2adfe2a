#include "gentract/nd/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace gentract::nd {

namespace {

int read_worker_count() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
    if (const char* env = std::getenv("GENTRACT_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1) n = cap;
    }
    if (n > 64) n = 64;
    return n;
}

thread_local bool inside_worker = false;

// Minimal persistent pool: one task at a time, fixed static partition.
class Pool {
public:
    explicit Pool(int workers) : workers_(workers) {
        for (int w = 1; w < workers_; ++w) {
            threads_.emplace_back([this, w] { worker_loop(w); });
        }
    }

    ~Pool() {
        {
            std::lock_guard<std::mutex> lk(mu_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : threads_) t.join();
    }

    void run(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
        task_n_ = n;
        task_fn_ = &fn;
        pending_.store(workers_ - 1, std::memory_order_release);
        {
            std::lock_guard<std::mutex> lk(mu_);
            ++generation_;
        }
        cv_.notify_all();

        inside_worker = true;
        run_slice(0);
        inside_worker = false;

        while (pending_.load(std::memory_order_acquire) != 0) std::this_thread::yield();
        task_fn_ = nullptr;
    }

    int workers() const { return workers_; }

private:
    void run_slice(int w) const {
        const std::int64_t n = task_n_;
        const std::int64_t chunk = (n + workers_ - 1) / workers_;
        const std::int64_t begin = w * chunk;
        const std::int64_t end = begin + chunk < n ? begin + chunk : n;
        if (begin < end) (*task_fn_)(begin, end);
    }

    void worker_loop(int w) {
        inside_worker = true;
        std::uint64_t seen = 0;
        for (;;) {
            {
                std::unique_lock<std::mutex> lk(mu_);
                cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
                if (stop_) return;
                seen = generation_;
            }
            run_slice(w);
            pending_.fetch_sub(1, std::memory_order_release);
        }
    }

    const int workers_;
    std::vector<std::thread> threads_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::uint64_t generation_ = 0;
    bool stop_ = false;
    std::atomic<int> pending_{0};
    std::int64_t task_n_ = 0;
    const std::function<void(std::int64_t, std::int64_t)>* task_fn_ = nullptr;
};

Pool& pool() {
    static Pool p(read_worker_count());
    return p;
}

}  // namespace

int worker_count() { return pool().workers(); }

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
    if (n <= 0) return;
    // Small ranges and nested calls run serially.
    if (n < 2 || inside_worker || pool().workers() == 1) {
        fn(0, n);
        return;
    }
    pool().run(n, fn);
}

}  // namespace gentract::nd
