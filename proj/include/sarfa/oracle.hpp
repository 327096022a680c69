#pragma once

// Q-value oracles and the session pool that hands them out to workers.

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "sarfa/saliency.hpp"

namespace sarfa {

/// Anything that can report Q-values for the legal actions of a state.
///
/// The state token is domain specific: a FEN for chess, raw frame bytes for
/// image agents, a layout string for gridworlds. `must_include` lists actions
/// the caller needs a value for even if the oracle would normally truncate
/// them away; oracles that always report every action may ignore it.
///
/// One oracle serves one caller at a time.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual QProfile evaluate(std::string_view state, std::span<const std::string> must_include) = 0;

  QProfile evaluate(std::string_view state) { return evaluate(state, {}); }
};

/// Adapts a callable; handy for in-process agents and tests.
class FunctionOracle final : public Oracle {
 public:
  using Fn = std::function<QProfile(std::string_view, std::span<const std::string>)>;

  explicit FunctionOracle(Fn fn) : fn_(std::move(fn)) {}
  QProfile evaluate(std::string_view state, std::span<const std::string> must_include) override {
    return fn_(state, must_include);
  }
  using Oracle::evaluate;

 private:
  Fn fn_;
};

/// Fixed set of oracle sessions. Workers take exclusive leases.
class SessionPool {
 public:
  explicit SessionPool(std::vector<std::unique_ptr<Oracle>> sessions)
      : sessions_(std::move(sessions)), free_(sessions_.size()) {
    if (sessions_.empty()) throw ContractViolation("session pool needs at least one session");
    for (std::size_t i = 0; i < sessions_.size(); ++i) free_[i] = i;
  }

  /// Pool over a single session.
  explicit SessionPool(std::unique_ptr<Oracle> session) : SessionPool(single(std::move(session))) {}

  /// Builds `n` sessions with `factory`.
  static SessionPool create(std::size_t n, const std::function<std::unique_ptr<Oracle>()>& factory) {
    std::vector<std::unique_ptr<Oracle>> sessions;
    for (std::size_t i = 0; i < std::max<std::size_t>(n, 1); ++i) sessions.push_back(factory());
    return SessionPool(std::move(sessions));
  }

  std::size_t size() const noexcept { return sessions_.size(); }

  class Lease {
   public:
    Lease(SessionPool& pool, std::size_t index) : pool_(&pool), index_(index) {}
    Lease(Lease&& other) noexcept : pool_(std::exchange(other.pool_, nullptr)), index_(other.index_) {}
    Lease(const Lease&) = delete;
    Lease& operator=(const Lease&) = delete;
    Lease& operator=(Lease&&) = delete;
    ~Lease() {
      if (pool_) pool_->release(index_);
    }
    Oracle& operator*() const { return *pool_->sessions_[index_]; }
    Oracle* operator->() const { return pool_->sessions_[index_].get(); }

   private:
    SessionPool* pool_;
    std::size_t index_;
  };

  Lease acquire() {
    std::unique_lock lock(mutex_);
    available_.wait(lock, [&] { return !free_.empty(); });
    const std::size_t idx = free_.back();
    free_.pop_back();
    return Lease(*this, idx);
  }

  /// Runs fn(oracle, i) for i in [0, n), spreading work over the sessions.
  /// Each index runs exactly once; the first exception is rethrown after all
  /// workers stop.
  void parallel_for(std::size_t n, const std::function<void(Oracle&, std::size_t)>& fn) {
    const std::size_t workers = std::min(n, size());
    if (workers == 0) return;
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto run = [&] {
      auto lease = acquire();
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(*lease, i);
        } catch (...) {
          std::lock_guard g(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    };
    if (workers == 1) {
      run();
    } else {
      std::vector<std::jthread> threads;
      threads.reserve(workers);
      for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(run);
    }
    if (error) std::rethrow_exception(error);
  }

 private:
  static std::vector<std::unique_ptr<Oracle>> single(std::unique_ptr<Oracle> s) {
    std::vector<std::unique_ptr<Oracle>> v;
    v.push_back(std::move(s));
    return v;
  }

  void release(std::size_t idx) {
    {
      std::lock_guard lock(mutex_);
      free_.push_back(idx);
    }
    available_.notify_one();
  }

  std::vector<std::unique_ptr<Oracle>> sessions_;
  std::vector<std::size_t> free_;
  std::mutex mutex_;
  std::condition_variable available_;
};

}  // namespace sarfa
