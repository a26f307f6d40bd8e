#pragma once

#include <atomic>
#include <cstddef>
#include <memory>
#include <vector>

namespace matchtu {

// Process-wide byte accounting for the library's numeric buffers (matrices
// and vectors). The benchmark harness snapshots it around a solve to report
// peak solver memory; counting is observation-only and never changes how or
// when buffers are allocated.
class AllocMeter {
 public:
  static AllocMeter& instance() {
    static AllocMeter meter;
    return meter;
  }

  void add(std::size_t bytes) {
    const std::size_t cur =
        current_.fetch_add(bytes, std::memory_order_relaxed) + bytes;
    std::size_t peak = peak_.load(std::memory_order_relaxed);
    while (cur > peak &&
           !peak_.compare_exchange_weak(peak, cur, std::memory_order_relaxed)) {
    }
  }

  void sub(std::size_t bytes) {
    current_.fetch_sub(bytes, std::memory_order_relaxed);
  }

  std::size_t current_bytes() const {
    return current_.load(std::memory_order_relaxed);
  }

  std::size_t peak_bytes() const {
    return peak_.load(std::memory_order_relaxed);
  }

  // Restarts peak tracking from the currently live bytes.
  void reset_peak() {
    peak_.store(current_.load(std::memory_order_relaxed),
                std::memory_order_relaxed);
  }

 private:
  AllocMeter() = default;
  std::atomic<std::size_t> current_{0};
  std::atomic<std::size_t> peak_{0};
};

// Measures the peak tracked bytes allocated on top of what was live when the
// probe was created. Create one right before the region of interest and read
// peak_bytes() after it.
class ScopedAllocationProbe {
 public:
  ScopedAllocationProbe() : baseline_(AllocMeter::instance().current_bytes()) {
    AllocMeter::instance().reset_peak();
  }

  std::size_t peak_bytes() const {
    const std::size_t peak = AllocMeter::instance().peak_bytes();
    return peak > baseline_ ? peak - baseline_ : 0;
  }

 private:
  std::size_t baseline_;
};

template <class T>
struct TrackedAllocator {
  using value_type = T;

  TrackedAllocator() = default;
  template <class U>
  TrackedAllocator(const TrackedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    AllocMeter::instance().add(n * sizeof(T));
    return std::allocator<T>{}.allocate(n);
  }

  void deallocate(T* p, std::size_t n) noexcept {
    std::allocator<T>{}.deallocate(p, n);
    AllocMeter::instance().sub(n * sizeof(T));
  }

  friend bool operator==(const TrackedAllocator&, const TrackedAllocator&) {
    return true;
  }
};

// Tracked double vector; the standard container for masses and scaling
// vectors throughout the library.
using DVec = std::vector<double, TrackedAllocator<double>>;

}  // namespace matchtu
