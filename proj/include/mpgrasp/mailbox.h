#pragma once

#include <cstdint>
#include <mutex>
#include <optional>

namespace mpgrasp {

/// Single-slot channel: put() overwrites whatever has not been read yet.
template <typename T>
class LatestValue {
 public:
  void put(T value) {
    std::lock_guard<std::mutex> lock(mu_);
    value_ = std::move(value);
    fresh_ = true;
    ++sequence_;
  }

  /// The value if it is newer than the last take(), else nullopt.
  std::optional<T> take() {
    std::lock_guard<std::mutex> lock(mu_);
    if (!fresh_) return std::nullopt;
    fresh_ = false;
    return value_;
  }

  /// Latest value regardless of whether it was read.
  std::optional<T> peek() const {
    std::lock_guard<std::mutex> lock(mu_);
    return value_;
  }

  std::uint64_t sequence() const {
    std::lock_guard<std::mutex> lock(mu_);
    return sequence_;
  }

  void clear() {
    std::lock_guard<std::mutex> lock(mu_);
    value_.reset();
    fresh_ = false;
  }

 private:
  mutable std::mutex mu_;
  std::optional<T> value_;
  bool fresh_ = false;
  std::uint64_t sequence_ = 0;
};

}  // namespace mpgrasp
