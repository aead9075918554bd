#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <utility>

#include "revexp/timestamp.hpp"

namespace revexp::github {

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp now() const = 0;
  virtual void sleep_for(std::chrono::milliseconds d) = 0;
  virtual void sleep_until(Timestamp t) = 0;
};

class SystemClock final : public Clock {
 public:
  Timestamp now() const override {
    return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  }
  void sleep_for(std::chrono::milliseconds d) override { std::this_thread::sleep_for(d); }
  void sleep_until(Timestamp t) override { std::this_thread::sleep_until(t); }
};

// Request allowance shared by concurrent fetchers. `remaining` is unknown until
// the first response reports it; while it is zero no permit is granted before
// `reset_at`.
class RateBudget {
 public:
  explicit RateBudget(std::size_t max_in_flight = 4,
                      std::shared_ptr<Clock> clock = std::make_shared<SystemClock>())
      : max_in_flight_(max_in_flight == 0 ? 1 : max_in_flight), clock_(std::move(clock)) {}

  class Permit {
   public:
    explicit Permit(RateBudget* b) : budget_(b) {}
    Permit(Permit&& o) noexcept : budget_(std::exchange(o.budget_, nullptr)) {}
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;
    Permit& operator=(Permit&&) = delete;
    ~Permit() {
      if (budget_) budget_->release();
    }

   private:
    RateBudget* budget_;
  };

  // Blocks until a request may be issued.
  Permit acquire() {
    std::unique_lock lk(mutex_);
    for (;;) {
      if (in_flight_ >= max_in_flight_) {
        cv_.wait(lk);
        continue;
      }
      if (remaining_ && *remaining_ == 0) {
        if (clock_->now() < reset_at_) {
          const auto until = reset_at_;
          lk.unlock();
          clock_->sleep_until(until);
          lk.lock();
          continue;
        }
        remaining_.reset();
      }
      break;
    }
    ++in_flight_;
    ++issued_;
    if (remaining_) --*remaining_;
    return Permit(this);
  }

  // Applies rate-limit headers from a response.
  void observe(std::optional<long> remaining, std::optional<Timestamp> reset_at) {
    std::lock_guard lk(mutex_);
    if (remaining) remaining_ = *remaining < 0 ? 0 : *remaining;
    if (reset_at) reset_at_ = *reset_at;
  }

  // Forces a wait until `reset_at` (used after an explicit rate-limit response).
  void exhaust_until(Timestamp reset_at) { observe(0, reset_at); }

  std::optional<long> remaining() const {
    std::lock_guard lk(mutex_);
    return remaining_;
  }
  Timestamp reset_at() const {
    std::lock_guard lk(mutex_);
    return reset_at_;
  }
  std::size_t in_flight() const {
    std::lock_guard lk(mutex_);
    return in_flight_;
  }
  std::size_t max_in_flight() const { return max_in_flight_; }
  std::size_t issued() const {
    std::lock_guard lk(mutex_);
    return issued_;
  }
  Clock& clock() { return *clock_; }

 private:
  void release() {
    {
      std::lock_guard lk(mutex_);
      --in_flight_;
    }
    cv_.notify_one();
  }

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::size_t max_in_flight_;
  std::size_t in_flight_ = 0;
  std::size_t issued_ = 0;
  std::optional<long> remaining_;
  Timestamp reset_at_{};
  std::shared_ptr<Clock> clock_;
};

}  // namespace revexp::github
