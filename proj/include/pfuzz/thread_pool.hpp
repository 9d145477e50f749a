#pragma once

#include <condition_variable>
#include <functional>
#include <future>
#include <mutex>
#include <queue>
#include <thread>
#include <vector>

namespace pfuzz {

// Fixed-size worker pool for dispatching attack-prompt batches. With
// worker count <= 1 tasks run inline on the caller, which keeps single
// threaded campaigns free of thread machinery.
class ThreadPool {
 public:
  explicit ThreadPool(int workers) {
    int n = workers > 1 ? workers : 0;
    for (int i = 0; i < n; ++i) {
      threads_.emplace_back([this] { run(); });
    }
  }

  ~ThreadPool() {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      stopping_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int worker_count() const { return static_cast<int>(threads_.size()); }

  std::future<void> submit(std::function<void()> task) {
    auto packaged =
        std::make_shared<std::packaged_task<void()>>(std::move(task));
    std::future<void> fut = packaged->get_future();
    if (threads_.empty()) {
      (*packaged)();
      return fut;
    }
    {
      std::lock_guard<std::mutex> lock(mutex_);
      queue_.push([packaged] { (*packaged)(); });
    }
    cv_.notify_one();
    return fut;
  }

 private:
  void run() {
    for (;;) {
      std::function<void()> task;
      {
        std::unique_lock<std::mutex> lock(mutex_);
        cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
        if (stopping_ && queue_.empty()) return;
        task = std::move(queue_.front());
        queue_.pop();
      }
      task();
    }
  }

  std::vector<std::thread> threads_;
  std::queue<std::function<void()>> queue_;
  std::mutex mutex_;
  std::condition_variable cv_;
  bool stopping_ = false;
};

// Runs fn(0..count-1) on the pool and collects results indexed by input
// position, so merging is deterministic regardless of completion order.
template <typename Fn>
auto parallel_map(ThreadPool& pool, std::size_t count, Fn fn)
    -> std::vector<decltype(fn(std::size_t{}))> {
  using R = decltype(fn(std::size_t{}));
  std::vector<R> results(count);
  std::vector<std::future<void>> futures;
  futures.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    futures.push_back(pool.submit([i, &results, &fn] { results[i] = fn(i); }));
  }
  for (auto& f : futures) f.get();
  return results;
}

}  // namespace pfuzz
