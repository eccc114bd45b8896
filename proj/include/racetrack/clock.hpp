#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <thread>

namespace racetrack {

/// Time source for stage accounting. Mock backends sleep through the same
/// clock so that a ManualClock makes every timing exact and reproducible.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::chrono::nanoseconds now() const = 0;
  virtual void sleep_for(std::chrono::nanoseconds d) = 0;
};

class SteadyClock final : public Clock {
 public:
  std::chrono::nanoseconds now() const override {
    return std::chrono::steady_clock::now().time_since_epoch();
  }
  void sleep_for(std::chrono::nanoseconds d) override {
    if (d.count() > 0) std::this_thread::sleep_for(d);
  }
};

/// Virtual time. sleep_for advances the clock instead of blocking.
class ManualClock final : public Clock {
 public:
  std::chrono::nanoseconds now() const override {
    return std::chrono::nanoseconds(ticks_.load(std::memory_order_acquire));
  }
  void sleep_for(std::chrono::nanoseconds d) override {
    if (d.count() > 0) ticks_.fetch_add(d.count(), std::memory_order_acq_rel);
  }

 private:
  std::atomic<std::int64_t> ticks_{0};
};

inline double to_ms(std::chrono::nanoseconds d) {
  return std::chrono::duration<double, std::milli>(d).count();
}

}  // namespace racetrack
