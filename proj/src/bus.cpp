#include "tbag/bus.hpp"

#include <algorithm>
#include <stdexcept>

namespace tbag {

namespace detail {

bool MessageQueue::push(const BusMessage& msg) {
  bool overflow = false;
  {
    std::lock_guard lock(mu_);
    if (closed_) return true;
    if (items_.size() >= capacity_) {
      items_.pop_front();
      dropped_.fetch_add(1);
      overflow = true;
    }
    items_.push_back(msg);
  }
  cv_.notify_one();
  return !overflow;
}

std::optional<BusMessage> MessageQueue::try_pop() {
  std::lock_guard lock(mu_);
  if (items_.empty()) return std::nullopt;
  BusMessage m = std::move(items_.front());
  items_.pop_front();
  return m;
}

std::optional<BusMessage> MessageQueue::pop_for(std::chrono::nanoseconds timeout) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [this] { return !items_.empty() || closed_; });
  if (items_.empty()) return std::nullopt;
  BusMessage m = std::move(items_.front());
  items_.pop_front();
  return m;
}

std::vector<BusMessage> MessageQueue::drain() {
  std::lock_guard lock(mu_);
  std::vector<BusMessage> out(std::make_move_iterator(items_.begin()),
                              std::make_move_iterator(items_.end()));
  items_.clear();
  return out;
}

void MessageQueue::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool MessageQueue::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

}  // namespace detail

Subscription::~Subscription() {
  if (queue_) queue_->close();
}

void Subscription::close() {
  if (queue_) queue_->close();
}

void Bus::publish(const BusMessage& msg, OriginId origin) {
  validate_topic(msg.topic);
  std::vector<std::shared_ptr<detail::MessageQueue>> targets;
  {
    std::lock_guard lock(mu_);
    const auto prune_collect = [&](QueueList& list) {
      std::erase_if(list, [&](const std::weak_ptr<detail::MessageQueue>& w) {
        auto q = w.lock();
        if (!q || q->closed()) return true;
        if (q->accepts(origin)) targets.push_back(std::move(q));
        return false;
      });
    };
    if (auto it = by_topic_.find(msg.topic); it != by_topic_.end()) prune_collect(it->second);
    prune_collect(wildcard_);
    // Deliver while holding the bus lock so concurrent publishers cannot
    // interleave a single publisher's messages out of order per queue.
    for (const auto& q : targets) {
      if (!q->push(msg)) overflows_.fetch_add(1);
    }
  }
  published_.fetch_add(1);
}

Subscription Bus::subscribe(const std::string& topic, std::size_t queue_capacity) {
  validate_topic(topic);
  if (queue_capacity == 0) throw std::invalid_argument("subscription capacity must be >= 1");
  auto q = std::make_shared<detail::MessageQueue>(queue_capacity, std::nullopt);
  std::lock_guard lock(mu_);
  by_topic_[topic].push_back(q);
  return Subscription(std::move(q), topic);
}

Subscription Bus::subscribe_all(std::size_t queue_capacity, std::optional<OriginId> exclude_origin) {
  if (queue_capacity == 0) throw std::invalid_argument("subscription capacity must be >= 1");
  auto q = std::make_shared<detail::MessageQueue>(queue_capacity, exclude_origin);
  std::lock_guard lock(mu_);
  wildcard_.push_back(q);
  return Subscription(std::move(q), "*");
}

Publisher::Publisher(Bus& bus, std::string topic) : bus_(&bus), topic_(std::move(topic)) {
  validate_topic(topic_);
}

void Publisher::publish(Payload payload, Stamp stamp) {
  last_stamp_ = std::max(last_stamp_, stamp);
  BusMessage msg{topic_, last_stamp_, seq_++, std::move(payload)};
  bus_->publish(msg);
}

}  // namespace tbag
