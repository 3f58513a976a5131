#pragma once

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <queue>
#include <stdexcept>
#include <thread>
#include <vector>

#include "hypertune/objectives.hpp"
#include "hypertune/scheduler.hpp"

namespace hypertune {

struct CompletionEvent {
    int worker = 0;
    double start_time = 0.0;
    double end_time = 0.0;
    Job job;
    EvalResult result;
};

/// Worker pool abstraction: submit jobs to free workers, then pull
/// completion events. `now()` is simulated seconds for the virtual pool and
/// elapsed wall seconds for the real one.
class Executor {
public:
    virtual ~Executor() = default;
    virtual int workers() const = 0;
    virtual void submit(int worker, const Job& job) = 0;
    virtual std::optional<CompletionEvent> wait_next() = 0;
    virtual double now() const = 0;
    virtual int in_flight() const = 0;
};

/// Deterministic discrete-event pool. Evaluation cost comes from the
/// objective's cost model, scaled by the worker's speed factor; promotions
/// of resumable objectives are charged only the incremental resource.
/// Completions are delivered in (time, worker) order and time never moves
/// backwards.
class SimExecutor final : public Executor {
public:
    SimExecutor(Objective& objective, int workers, std::vector<double> speed_factors = {})
        : objective_(objective), workers_(workers), speed_(std::move(speed_factors)) {
        if (workers_ < 1) throw std::invalid_argument("SimExecutor: need at least one worker");
        if (speed_.empty()) speed_.assign(static_cast<std::size_t>(workers_), 1.0);
        if (speed_.size() != static_cast<std::size_t>(workers_))
            throw std::invalid_argument("SimExecutor: one speed factor per worker");
        for (double f : speed_)
            if (!(f > 0.0)) throw std::invalid_argument("SimExecutor: speed factors must be > 0");
    }

    int workers() const override { return workers_; }
    double now() const override { return now_; }
    int in_flight() const override { return static_cast<int>(queue_.size()); }

    void submit(int worker, const Job& job) override {
        if (worker < 0 || worker >= workers_)
            throw std::invalid_argument("SimExecutor: worker out of range");
        auto result = objective_.evaluate(job.config, job.level);
        double duration = result.cost_seconds;
        if (job.kind == JobKind::Promotion && objective_.resumable() && job.level > 1)
            duration = std::max(0.0, duration - objective_.cost(job.config, job.level - 1));
        duration *= speed_[static_cast<std::size_t>(worker)];
        queue_.push(Pending{now_ + duration, worker, seq_++, now_, job, result});
    }

    std::optional<CompletionEvent> wait_next() override {
        if (queue_.empty()) return std::nullopt;
        const auto top = queue_.top();
        queue_.pop();
        now_ = top.end;
        return CompletionEvent{top.worker, top.start, top.end, top.job, top.result};
    }

private:
    struct Pending {
        double end;
        int worker;
        std::uint64_t seq;
        double start;
        Job job;
        EvalResult result;
    };
    struct Later {
        bool operator()(const Pending& a, const Pending& b) const {
            if (a.end != b.end) return a.end > b.end;
            if (a.worker != b.worker) return a.worker > b.worker;
            return a.seq > b.seq;
        }
    };

    Objective& objective_;
    int workers_;
    std::vector<double> speed_;
    double now_ = 0.0;
    std::uint64_t seq_ = 0;
    std::priority_queue<Pending, std::vector<Pending>, Later> queue_;
};

/// Wall-clock pool: one OS thread per busy worker, used for subprocess
/// objectives. The objective's evaluate must be safe to call concurrently.
class RealExecutor final : public Executor {
public:
    RealExecutor(Objective& objective, int workers)
        : objective_(objective),
          workers_(workers),
          slots_(static_cast<std::size_t>(workers)),
          start_(std::chrono::steady_clock::now()) {
        if (workers_ < 1) throw std::invalid_argument("RealExecutor: need at least one worker");
    }

    ~RealExecutor() override {
        for (auto& t : slots_)
            if (t.joinable()) t.join();
    }

    int workers() const override { return workers_; }

    double now() const override {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

    int in_flight() const override {
        std::lock_guard<std::mutex> lock(mu_);
        return submitted_ - delivered_;
    }

    void submit(int worker, const Job& job) override {
        if (worker < 0 || worker >= workers_)
            throw std::invalid_argument("RealExecutor: worker out of range");
        auto& slot = slots_[static_cast<std::size_t>(worker)];
        if (slot.joinable()) slot.join();
        {
            std::lock_guard<std::mutex> lock(mu_);
            ++submitted_;
        }
        const double start = now();
        slot = std::thread([this, worker, job, start] {
            CompletionEvent ev;
            ev.worker = worker;
            ev.start_time = start;
            ev.job = job;
            try {
                ev.result = objective_.evaluate(job.config, job.level);
            } catch (const std::exception&) {
                ev.result = EvalResult{0.0, std::max(1e-9, now() - start), true};
            }
            ev.end_time = now();
            {
                std::lock_guard<std::mutex> lock(mu_);
                done_.push_back(std::move(ev));
            }
            cv_.notify_one();
        });
    }

    std::optional<CompletionEvent> wait_next() override {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [this] { return !done_.empty() || submitted_ == delivered_; });
        if (done_.empty()) return std::nullopt;
        auto ev = std::move(done_.front());
        done_.pop_front();
        ++delivered_;
        return ev;
    }

private:
    Objective& objective_;
    int workers_;
    std::vector<std::thread> slots_;
    std::chrono::steady_clock::time_point start_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<CompletionEvent> done_;
    int submitted_ = 0;
    int delivered_ = 0;
};

}  // namespace hypertune
