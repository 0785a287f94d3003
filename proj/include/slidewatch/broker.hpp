#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "slidewatch/errors.hpp"

namespace slidewatch {

// In-process messaging fabric. Two streaming-connection kinds: bounded
// push-pop queues with backpressure (full queue blocks the producer) and
// publisher-subscriber channels whose subscriber buffers use the same
// backpressure contract. Lossless by construction: nothing is dropped except
// messages published to a channel with zero subscribers.

inline constexpr std::size_t kDefaultQueueCapacity = 4096;

struct QueueStats {
    std::string name;
    std::size_t capacity = 0;
    std::size_t depth = 0;
    std::uint64_t pushed = 0;
    std::uint64_t popped = 0;
    bool closed = false;
};

enum class PopStatus { ok, timed_out, closed };

template <typename T>
class Queue {
public:
    explicit Queue(std::string name, std::size_t capacity = kDefaultQueueCapacity)
        : name_(std::move(name)), capacity_(capacity == 0 ? 1 : capacity) {}

    Queue(const Queue&) = delete;
    Queue& operator=(const Queue&) = delete;

    /// FIFO enqueue. Blocks while the queue is at capacity.
    /// Throws QueueClosed if the queue is (or becomes) closed.
    void push(T item) {
        std::unique_lock lock(mu_);
        not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
        if (closed_) throw QueueClosed(name_);
        items_.push_back(std::move(item));
        ++pushed_;
        lock.unlock();
        not_empty_.notify_one();
    }

    /// Like push, but gives up after `timeout` instead of blocking
    /// indefinitely. Returns false when the queue stayed full.
    bool try_push_for(const T& item, std::chrono::milliseconds timeout) {
        std::unique_lock lock(mu_);
        if (!not_full_.wait_for(lock, timeout,
                                [&] { return closed_ || items_.size() < capacity_; }))
            return false;
        if (closed_) throw QueueClosed(name_);
        items_.push_back(item);
        ++pushed_;
        lock.unlock();
        not_empty_.notify_one();
        return true;
    }

    /// Pops the oldest message. Returns timed_out if nothing arrived within
    /// `timeout`, closed once the queue is closed and drained.
    PopStatus pop(T& out, std::chrono::milliseconds timeout) {
        std::unique_lock lock(mu_);
        if (!not_empty_.wait_for(lock, timeout, [&] { return closed_ || !items_.empty(); }))
            return PopStatus::timed_out;
        return pop_locked(out, lock);
    }

    /// Blocks until a message arrives or the queue is closed and drained.
    std::optional<T> pop_wait() {
        std::unique_lock lock(mu_);
        not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
        T out;
        if (pop_locked(out, lock) == PopStatus::closed) return std::nullopt;
        return out;
    }

    /// Closes the queue: pending and future pushes throw, pops drain the
    /// remaining messages and then report closed.
    void close() {
        {
            std::lock_guard lock(mu_);
            closed_ = true;
        }
        not_full_.notify_all();
        not_empty_.notify_all();
    }

    QueueStats stats() const {
        std::lock_guard lock(mu_);
        return QueueStats{name_, capacity_, items_.size(), pushed_, popped_, closed_};
    }

    const std::string& name() const { return name_; }
    std::size_t capacity() const { return capacity_; }

    std::size_t depth() const {
        std::lock_guard lock(mu_);
        return items_.size();
    }

    bool closed() const {
        std::lock_guard lock(mu_);
        return closed_;
    }

private:
    PopStatus pop_locked(T& out, std::unique_lock<std::mutex>& lock) {
        if (items_.empty()) return PopStatus::closed; // woken by close() with nothing left
        out = std::move(items_.front());
        items_.pop_front();
        ++popped_;
        lock.unlock();
        not_full_.notify_one();
        return PopStatus::ok;
    }

    mutable std::mutex mu_;
    std::condition_variable not_full_;
    std::condition_variable not_empty_;
    std::deque<T> items_;
    std::string name_;
    std::size_t capacity_;
    std::uint64_t pushed_ = 0;
    std::uint64_t popped_ = 0;
    bool closed_ = false;
};

template <typename T>
class Channel {
public:
    explicit Channel(std::string name, std::size_t subscriber_capacity = kDefaultQueueCapacity)
        : name_(std::move(name)), subscriber_capacity_(subscriber_capacity) {}

    class Subscription {
    public:
        Subscription() = default;

        PopStatus receive(T& out, std::chrono::milliseconds timeout) {
            return buffer_->pop(out, timeout);
        }

        std::optional<T> receive_wait() { return buffer_->pop_wait(); }

        QueueStats stats() const { return buffer_->stats(); }

    private:
        friend class Channel;
        explicit Subscription(std::shared_ptr<Queue<T>> buffer) : buffer_(std::move(buffer)) {}
        std::shared_ptr<Queue<T>> buffer_;
    };

    /// New subscribers see only messages published after this call.
    Subscription subscribe() {
        std::lock_guard lock(mu_);
        auto buffer = std::make_shared<Queue<T>>(name_ + "#" + std::to_string(subs_.size()),
                                                 subscriber_capacity_);
        if (closed_) buffer->close();
        subs_.push_back(buffer);
        return Subscription(buffer);
    }

    /// Delivers a copy to every current subscriber, in publish order per
    /// subscriber. A full subscriber buffer blocks the publisher. Publishing
    /// with zero subscribers drops the message. Returns the delivered count.
    std::size_t publish(const T& msg) {
        std::vector<std::shared_ptr<Queue<T>>> targets;
        {
            std::lock_guard lock(mu_);
            if (closed_) throw QueueClosed(name_);
            targets = subs_;
        }
        for (auto& q : targets) q->push(msg);
        return targets.size();
    }

    std::size_t subscriber_count() const {
        std::lock_guard lock(mu_);
        return subs_.size();
    }

    void close() {
        std::vector<std::shared_ptr<Queue<T>>> targets;
        {
            std::lock_guard lock(mu_);
            closed_ = true;
            targets = subs_;
        }
        for (auto& q : targets) q->close();
    }

    const std::string& name() const { return name_; }

private:
    mutable std::mutex mu_;
    std::vector<std::shared_ptr<Queue<T>>> subs_;
    std::string name_;
    std::size_t subscriber_capacity_;
    bool closed_ = false;
};

} // namespace slidewatch
