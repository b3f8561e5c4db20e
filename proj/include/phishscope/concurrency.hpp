#pragma once

// Small building blocks for the scan pipeline.

#include <chrono>
#include <condition_variable>
#include <deque>
#include <set>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "phishscope/core.hpp"

namespace phishscope {

// Multi-producer multi-consumer queue. push blocks while full (back-pressure),
// pop blocks while empty and returns nullopt once closed and drained.
template <class T>
class BoundedQueue {
public:
    explicit BoundedQueue(size_t capacity) : cap_(capacity ? capacity : 1) {}

    bool push(T v) {
        std::unique_lock lock(mu_);
        not_full_.wait(lock, [&] { return closed_ || q_.size() < cap_; });
        if (closed_) return false;
        q_.push_back(std::move(v));
        not_empty_.notify_one();
        return true;
    }

    std::optional<T> pop() {
        std::unique_lock lock(mu_);
        not_empty_.wait(lock, [&] { return closed_ || !q_.empty(); });
        if (q_.empty()) return std::nullopt;
        T v = std::move(q_.front());
        q_.pop_front();
        not_full_.notify_one();
        return v;
    }

    void close() {
        std::lock_guard lock(mu_);
        closed_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }

    size_t size() const {
        std::lock_guard lock(mu_);
        return q_.size();
    }
    size_t capacity() const { return cap_; }

private:
    size_t cap_;
    mutable std::mutex mu_;
    std::condition_variable not_empty_, not_full_;
    std::deque<T> q_;
    bool closed_ = false;
};

// rate <= 0 disables limiting.
class TokenBucket {
public:
    using clock = std::chrono::steady_clock;

    explicit TokenBucket(double rate_per_sec, double burst = 0)
        : rate_(rate_per_sec), burst_(burst > 0 ? burst : std::max(1.0, rate_per_sec)), tokens_(burst_), last_(clock::now()) {}

    void acquire() {
        if (rate_ <= 0) return;
        for (;;) {
            std::chrono::duration<double> wait{};
            {
                std::lock_guard lock(mu_);
                refill();
                if (tokens_ >= 1.0) {
                    tokens_ -= 1.0;
                    return;
                }
                wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
            }
            std::this_thread::sleep_for(wait);
        }
    }

    bool try_acquire() {
        if (rate_ <= 0) return true;
        std::lock_guard lock(mu_);
        refill();
        if (tokens_ < 1.0) return false;
        tokens_ -= 1.0;
        return true;
    }

    double rate() const { return rate_; }

private:
    void refill() {
        auto now = clock::now();
        tokens_ = std::min(burst_, tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
        last_ = now;
    }

    double rate_;
    double burst_;
    double tokens_;
    clock::time_point last_;
    std::mutex mu_;
};

// One mutex per key, created on demand and dropped when nobody holds it.
class KeyedMutex {
public:
    class Guard {
    public:
        Guard(KeyedMutex& km, std::string key) : km_(&km), key_(std::move(key)) { km_->lock(key_); }
        Guard(const Guard&) = delete;
        Guard& operator=(const Guard&) = delete;
        ~Guard() { km_->unlock(key_); }

    private:
        KeyedMutex* km_;
        std::string key_;
    };

    Guard hold(std::string key) { return Guard(*this, std::move(key)); }

    size_t active_keys() const {
        std::lock_guard lock(mu_);
        return held_.size();
    }

private:
    void lock(const std::string& key) {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return !held_.count(key); });
        held_.insert(key);
    }
    void unlock(const std::string& key) {
        std::lock_guard lock(mu_);
        held_.erase(key);
        cv_.notify_all();
    }

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::set<std::string> held_;
};

}  // namespace phishscope
