#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace zoomin::util {

std::string_view trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);
bool iequals_ascii(std::string_view a, std::string_view b);
std::vector<std::string> split(std::string_view s, char sep);

std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);

std::string base64_encode(const std::uint8_t* data, std::size_t len);

// UTC wall clock, ISO-8601 with millisecond precision.
std::string iso8601_utc_now();

// Shortest round-trip decimal form of a double ("1.5", "0.109", ...).
std::string format_double(double v);

/// Counting semaphore with runtime capacity. capacity <= 0 means unlimited.
class Semaphore {
 public:
  explicit Semaphore(int capacity) : capacity_(capacity), available_(capacity) {}

  void acquire() {
    if (capacity_ <= 0) return;
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return available_ > 0; });
    --available_;
  }

  void release() {
    if (capacity_ <= 0) return;
    {
      std::lock_guard lock(mu_);
      ++available_;
    }
    cv_.notify_one();
  }

  int capacity() const { return capacity_; }

 private:
  int capacity_;
  int available_;
  std::mutex mu_;
  std::condition_variable cv_;
};

class SemaphoreTicket {
 public:
  explicit SemaphoreTicket(Semaphore& s) : sem_(&s) { sem_->acquire(); }
  ~SemaphoreTicket() {
    if (sem_) sem_->release();
  }
  SemaphoreTicket(const SemaphoreTicket&) = delete;
  SemaphoreTicket& operator=(const SemaphoreTicket&) = delete;

 private:
  Semaphore* sem_;
};

}  // namespace zoomin::util
