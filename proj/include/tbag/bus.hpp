#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tbag/messages.hpp"

namespace tbag {

/// Identifies where a publish came from; links use it to avoid echoing a
/// message back to the peer it arrived from.
using OriginId = std::uint32_t;
inline constexpr OriginId kLocalOrigin = 0;

namespace detail {

class MessageQueue {
 public:
  MessageQueue(std::size_t capacity, std::optional<OriginId> exclude_origin)
      : capacity_(capacity), exclude_origin_(exclude_origin) {}

  /// Returns false if the oldest message had to be dropped.
  bool push(const BusMessage& msg);
  std::optional<BusMessage> try_pop();
  std::optional<BusMessage> pop_for(std::chrono::nanoseconds timeout);
  std::vector<BusMessage> drain();
  void close();
  bool closed() const;
  std::uint64_t dropped() const { return dropped_.load(); }
  bool accepts(OriginId origin) const { return !exclude_origin_ || *exclude_origin_ != origin; }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<BusMessage> items_;
  std::size_t capacity_;
  std::optional<OriginId> exclude_origin_;
  std::atomic<std::uint64_t> dropped_{0};
  bool closed_ = false;
};

}  // namespace detail

/// Pull-based subscription handle. Single consumer; movable between threads.
/// Destroying the handle unsubscribes.
class Subscription {
 public:
  Subscription() = default;
  Subscription(std::shared_ptr<detail::MessageQueue> queue, std::string topic)
      : queue_(std::move(queue)), topic_(std::move(topic)) {}
  Subscription(Subscription&&) noexcept = default;
  Subscription& operator=(Subscription&&) noexcept = default;
  ~Subscription();

  std::optional<BusMessage> try_pop() { return queue_->try_pop(); }
  std::optional<BusMessage> pop_for(std::chrono::nanoseconds timeout) {
    return queue_->pop_for(timeout);
  }
  std::vector<BusMessage> drain() { return queue_->drain(); }
  /// Messages discarded by drop-oldest overflow.
  std::uint64_t dropped() const { return queue_->dropped(); }
  const std::string& topic() const { return topic_; }
  bool valid() const { return queue_ != nullptr; }
  /// Wakes any blocked pop_for and rejects further deliveries.
  void close();

 private:
  std::shared_ptr<detail::MessageQueue> queue_;
  std::string topic_;
};

/// In-process topic bus. Publishing never blocks on subscribers: each
/// subscription has a bounded drop-oldest queue.
class Bus {
 public:
  Bus() = default;
  Bus(const Bus&) = delete;
  Bus& operator=(const Bus&) = delete;

  void publish(const BusMessage& msg, OriginId origin = kLocalOrigin);
  Subscription subscribe(const std::string& topic, std::size_t queue_capacity);
  /// Receives every topic. Messages published with `exclude_origin` are skipped.
  Subscription subscribe_all(std::size_t queue_capacity,
                             std::optional<OriginId> exclude_origin = std::nullopt);

  OriginId allocate_origin() { return next_origin_.fetch_add(1); }

  /// Total drop-oldest overflows across all subscriptions.
  std::uint64_t overflow_count() const { return overflows_.load(); }
  std::uint64_t published_count() const { return published_.load(); }

 private:
  using QueueList = std::vector<std::weak_ptr<detail::MessageQueue>>;

  std::mutex mu_;
  std::unordered_map<std::string, QueueList> by_topic_;
  QueueList wildcard_;
  std::atomic<std::uint64_t> overflows_{0};
  std::atomic<std::uint64_t> published_{0};
  std::atomic<OriginId> next_origin_{1};
};

/// Stamps and sequences messages for one (publisher, topic).
class Publisher {
 public:
  Publisher(Bus& bus, std::string topic);

  void publish(Payload payload, Stamp stamp);
  std::uint64_t next_seq() const { return seq_; }
  const std::string& topic() const { return topic_; }

 private:
  Bus* bus_;
  std::string topic_;
  std::uint64_t seq_ = 0;
  Stamp last_stamp_ = 0;
};

}  // namespace tbag
