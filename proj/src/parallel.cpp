#include "binnet/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace binnet {
namespace {

std::atomic<bool> g_single_worker{false};

int detect_worker_count() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("BINNET_THREADS")) {
    char* end = nullptr;
    long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) n = std::min<long>(n, cap);
  }
  return n;
}

// Fork-join pool with persistent workers. Work items are contiguous index
// ranges; the partition depends only on n and the worker count.
class Pool {
 public:
  explicit Pool(int workers) : chunks_(workers) {
    for (int t = 1; t < workers; ++t) {
      threads_.emplace_back([this, t] { worker_loop(t); });
    }
  }

  ~Pool() {
    {
      std::lock_guard<std::mutex> lk(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& th : threads_) th.join();
  }

  int width() const { return chunks_; }

  void run(std::int64_t n,
           const std::function<void(std::int64_t, std::int64_t)>& body) {
    const int parts = chunks_;
    {
      std::lock_guard<std::mutex> lk(mu_);
      body_ = &body;
      total_ = n;
      pending_ = parts - 1;
      ++generation_;
    }
    cv_.notify_all();
    run_chunk(0);
    std::unique_lock<std::mutex> lk(mu_);
    done_cv_.wait(lk, [this] { return pending_ == 0; });
    body_ = nullptr;
  }

 private:
  void run_chunk(int t) {
    const std::int64_t per = (total_ + chunks_ - 1) / chunks_;
    const std::int64_t lo = std::min<std::int64_t>(total_, per * t);
    const std::int64_t hi = std::min<std::int64_t>(total_, lo + per);
    if (lo < hi) (*body_)(lo, hi);
  }

  void worker_loop(int t) {
    std::uint64_t seen = 0;
    for (;;) {
      std::unique_lock<std::mutex> lk(mu_);
      cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      lk.unlock();
      run_chunk(t);
      lk.lock();
      if (--pending_ == 0) done_cv_.notify_one();
    }
  }

  const int chunks_;
  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(std::int64_t, std::int64_t)>* body_ = nullptr;
  std::int64_t total_ = 0;
  int pending_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
};

Pool& pool() {
  static Pool p(detect_worker_count());
  return p;
}

}  // namespace

int worker_count() {
  if (g_single_worker.load(std::memory_order_relaxed)) return 1;
  return pool().width();
}

void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& body) {
  if (n <= 0) return;
  if (worker_count() == 1 || n == 1) {
    body(0, n);
    return;
  }
  pool().run(n, body);
}

SingleWorkerGuard::SingleWorkerGuard() {
  g_single_worker.store(true, std::memory_order_relaxed);
}

SingleWorkerGuard::~SingleWorkerGuard() {
  g_single_worker.store(false, std::memory_order_relaxed);
}

}  // namespace binnet
