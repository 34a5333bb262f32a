#ifndef FISOR_THREAD_POOL_HPP
#define FISOR_THREAD_POOL_HPP

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace fisor {

// Minimal persistent worker pool. Work is always split into a fixed number
// of tasks chosen by the caller, so results never depend on how many
// workers happen to exist (FISOR_THREADS overrides the worker count).
class ThreadPool {
public:
  static ThreadPool& instance() {
    static ThreadPool pool;
    return pool;
  }

  int workers() const { return static_cast<int>(threads_.size()) + 1; }

  // Runs fn(task) for task in [0, n_tasks); blocks until all complete.
  // The calling thread participates.
  void run(int n_tasks, const std::function<void(int)>& fn) {
    if (n_tasks <= 0) return;
    if (threads_.empty() || n_tasks == 1) {
      for (int i = 0; i < n_tasks; ++i) fn(i);
      return;
    }
    {
      std::lock_guard<std::mutex> lock(mutex_);
      fn_ = &fn;
      next_.store(0, std::memory_order_relaxed);
      remaining_.store(n_tasks, std::memory_order_relaxed);
      total_ = n_tasks;
      ++generation_;
    }
    cv_.notify_all();
    work_off_tasks();
    std::unique_lock<std::mutex> lock(mutex_);
    done_cv_.wait(lock, [&] { return remaining_.load(std::memory_order_acquire) == 0; });
    fn_ = nullptr;
  }

  ~ThreadPool() {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      stop_ = true;
      ++generation_;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

private:
  ThreadPool() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (const char* env = std::getenv("FISOR_THREADS")) {
      const int v = std::atoi(env);
      if (v >= 1) n = v;
    }
    if (n < 1) n = 1;
    for (int i = 0; i < n - 1; ++i) threads_.emplace_back([this] { worker_loop(); });
  }

  void work_off_tasks() {
    for (;;) {
      const int task = next_.fetch_add(1, std::memory_order_relaxed);
      if (task >= total_) return;
      (*fn_)(task);
      if (remaining_.fetch_sub(1, std::memory_order_acq_rel) == 1) {
        std::lock_guard<std::mutex> lock(mutex_);
        done_cv_.notify_all();
      }
    }
  }

  void worker_loop() {
    std::uint64_t seen = 0;
    for (;;) {
      {
        std::unique_lock<std::mutex> lock(mutex_);
        cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        if (fn_ == nullptr) continue;
      }
      work_off_tasks();
    }
  }

  std::vector<std::thread> threads_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(int)>* fn_ = nullptr;
  std::atomic<int> next_{0};
  std::atomic<int> remaining_{0};
  int total_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
};

inline void parallel_tasks(int n_tasks, const std::function<void(int)>& fn) {
  ThreadPool::instance().run(n_tasks, fn);
}

}  // namespace fisor

#endif
