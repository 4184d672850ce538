#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

namespace fsa {

// Explicit accounting of transient allocations. Every temporary tensor built
// during a step registers its byte size here; persistent data (graph,
// features, parameters, optimizer moments) never does.
class MemoryMeter {
 public:
  void acquire(std::size_t bytes) {
    std::lock_guard lock(mu_);
    current_ += bytes;
    peak_ = std::max(peak_, current_);
  }

  // Releasing more than is held is an accounting bug; there is no sane
  // way to continue, so the process aborts.
  void release(std::size_t bytes) {
    std::lock_guard lock(mu_);
    if (bytes > current_) {
      std::fprintf(stderr, "fsa::MemoryMeter: release of %zu bytes with only %zu held\n", bytes,
                   current_);
      std::abort();
    }
    current_ -= bytes;
  }

  std::size_t current() const {
    std::lock_guard lock(mu_);
    return current_;
  }
  std::size_t peak() const {
    std::lock_guard lock(mu_);
    return peak_;
  }

  /// Start a new measurement window: peak restarts from what is live now.
  void reset_peak() {
    std::lock_guard lock(mu_);
    peak_ = current_;
  }

 private:
  mutable std::mutex mu_;
  std::size_t current_ = 0;
  std::size_t peak_ = 0;
};

/// RAII registration of `bytes` with a meter (null meter = untracked).
class MeterLease {
 public:
  MeterLease() = default;
  MeterLease(MemoryMeter* meter, std::size_t bytes) : meter_(meter), bytes_(bytes) {
    if (meter_) meter_->acquire(bytes_);
  }
  MeterLease(const MeterLease&) = delete;
  MeterLease& operator=(const MeterLease&) = delete;
  MeterLease(MeterLease&& o) noexcept
      : meter_(std::exchange(o.meter_, nullptr)), bytes_(std::exchange(o.bytes_, 0)) {}
  MeterLease& operator=(MeterLease&& o) noexcept {
    if (this != &o) {
      reset();
      meter_ = std::exchange(o.meter_, nullptr);
      bytes_ = std::exchange(o.bytes_, 0);
    }
    return *this;
  }
  ~MeterLease() { reset(); }

  void reset() {
    if (meter_) meter_->release(bytes_);
    meter_ = nullptr;
    bytes_ = 0;
  }
  std::size_t bytes() const noexcept { return bytes_; }

 private:
  MemoryMeter* meter_ = nullptr;
  std::size_t bytes_ = 0;
};

/// Fixed-size buffer whose storage is registered with a MemoryMeter for its
/// whole lifetime. Move-only.
template <class T>
class TrackedBuffer {
 public:
  TrackedBuffer() = default;
  TrackedBuffer(std::size_t n, T fill, MemoryMeter* meter)
      : lease_(meter, n * sizeof(T)), data_(n, fill) {}
  explicit TrackedBuffer(std::size_t n, MemoryMeter* meter = nullptr) : TrackedBuffer(n, T{}, meter) {}

  TrackedBuffer(TrackedBuffer&&) noexcept = default;
  TrackedBuffer& operator=(TrackedBuffer&&) noexcept = default;

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }
  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  std::span<T> span() noexcept { return data_; }
  std::span<const T> span() const noexcept { return data_; }
  const std::vector<T>& vec() const noexcept { return data_; }

  /// Drops storage and accounting.
  void release() {
    std::vector<T>().swap(data_);
    lease_.reset();
  }

  friend bool operator==(const TrackedBuffer& a, const TrackedBuffer& b) { return a.data_ == b.data_; }

 private:
  MeterLease lease_;
  std::vector<T> data_;
};

}  // namespace fsa
