#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "hypertune/allocator.hpp"
#include "hypertune/executor.hpp"
#include "hypertune/measurement.hpp"
#include "hypertune/objectives.hpp"
#include "hypertune/scheduler.hpp"
#include "hypertune/search_space.hpp"
#include "hypertune/surrogate.hpp"

namespace hypertune {

enum class SchedulerVariant { Dasha, Asha, Sha, Hyperband, Random };
enum class SamplerKind { Model, Random };

inline std::string to_string(SchedulerVariant v) {
    switch (v) {
    case SchedulerVariant::Dasha: return "dasha";
    case SchedulerVariant::Asha: return "asha";
    case SchedulerVariant::Sha: return "sha";
    case SchedulerVariant::Hyperband: return "hyperband";
    case SchedulerVariant::Random: return "random";
    }
    return "?";
}

inline std::optional<SchedulerVariant> parse_variant(const std::string& name) {
    if (name == "dasha") return SchedulerVariant::Dasha;
    if (name == "asha") return SchedulerVariant::Asha;
    if (name == "sha") return SchedulerVariant::Sha;
    if (name == "hyperband") return SchedulerVariant::Hyperband;
    if (name == "random") return SchedulerVariant::Random;
    return std::nullopt;
}

inline std::string to_string(SamplerKind s) {
    return s == SamplerKind::Model ? "model" : "random";
}

inline std::optional<SamplerKind> parse_sampler(const std::string& name) {
    if (name == "model") return SamplerKind::Model;
    if (name == "random") return SamplerKind::Random;
    return std::nullopt;
}

struct EngineOptions {
    SchedulerVariant variant = SchedulerVariant::Dasha;
    SamplerKind sampler = SamplerKind::Model;
    int n_workers = 1;
    double time_budget_s = 100.0;
    std::uint64_t seed = 1;
    int allocator_samples = 100;
    int round_robin_multiplier = 3;
    std::optional<int> fixed_bracket;
    std::vector<double> worker_speed_factors;
    std::optional<double> target_regret;
    std::optional<double> target_y;
    SuggestOptions suggest{};
    ForestOptions forest{};
    int refresh_interval = 10;
    bool real_time = false;
};

struct TrajectoryPoint {
    double wall_clock = 0.0;
    double best_y = 0.0;
    int level = 1;
    int config_id = 0;
    int bracket = 1;

    bool operator==(const TrajectoryPoint&) const = default;
};

struct PromotionEvent {
    std::string key;
    int from_level = 1;
    double time = 0.0;
    std::size_t d_from = 0;  // |D_k| at decision time
    std::size_t d_next = 0;  // |D_{k+1}| at decision time
};

struct ExperimentResult {
    std::vector<TrajectoryPoint> trajectory;
    MeasurementStore store;
    std::vector<double> idle_per_worker;
    double idle_seconds = 0.0;
    std::vector<PromotionEvent> promotions;
    std::size_t completed = 0;
    std::size_t discarded = 0;
    double end_time = 0.0;
    std::optional<double> best_y;
    std::optional<double> best_true;
    std::optional<double> time_to_target;
};

namespace detail {

inline int level_of_resource(double r, const TunerParams& tuner) {
    const int K = tuner.levels();
    const int level = 1 + static_cast<int>(std::llround(std::log(std::max(r, 1.0)) /
                                                        std::log(static_cast<double>(tuner.eta))));
    return std::clamp(level, 1, K);
}

/// Shared worker bookkeeping for the dispatch loops. Idle time accumulates
/// per worker between becoming free and the next dispatch; trailing idle
/// after the final completion is not counted.
struct PoolState {
    Executor* exec = nullptr;
    double budget = 0.0;
    std::vector<bool> busy;
    std::vector<double> free_since;
    std::vector<double> idle;
    std::size_t discarded = 0;
    bool over_budget = false;

    explicit PoolState(Executor& e, double budget_s)
        : exec(&e),
          budget(budget_s),
          busy(static_cast<std::size_t>(e.workers()), false),
          free_since(static_cast<std::size_t>(e.workers()), 0.0),
          idle(static_cast<std::size_t>(e.workers()), 0.0) {}

    void dispatch(int worker, const Job& job) {
        idle[static_cast<std::size_t>(worker)] +=
            exec->now() - free_since[static_cast<std::size_t>(worker)];
        busy[static_cast<std::size_t>(worker)] = true;
        exec->submit(worker, job);
    }

    void release(int worker, double at) {
        busy[static_cast<std::size_t>(worker)] = false;
        free_since[static_cast<std::size_t>(worker)] = at;
    }

    /// Synchronization barrier: all free workers idle until `at`.
    void barrier(double at) {
        for (std::size_t w = 0; w < busy.size(); ++w) {
            if (busy[w]) continue;
            idle[w] += std::max(0.0, at - free_since[w]);
            free_since[w] = std::max(free_since[w], at);
        }
    }

    double total_idle() const {
        double total = 0.0;
        for (double v : idle) total += v;
        return total;
    }
};

using RecordFn = std::function<double(const CompletionEvent&)>;

/// Evaluates one synchronous rung: all configs at the given level, with a
/// barrier at the end. Returns (ranking y, config) per completion in
/// completion order.
inline std::vector<std::pair<double, Configuration>> run_rung(
    PoolState& pool, const std::vector<Configuration>& configs, int level, int bracket,
    JobKind kind, const RecordFn& record) {
    std::vector<std::pair<double, Configuration>> scored;
    std::size_t next = 0;
    for (;;) {
        for (int w = 0; w < pool.exec->workers(); ++w) {
            if (pool.busy[static_cast<std::size_t>(w)]) continue;
            if (next >= configs.size()) break;
            if (pool.exec->now() >= pool.budget) break;
            Job job;
            job.config = configs[next++];
            job.level = level;
            job.bracket_id = bracket;
            job.kind = kind;
            pool.dispatch(w, job);
        }
        if (pool.exec->in_flight() == 0) break;
        auto ev = pool.exec->wait_next();
        if (!ev) break;
        if (ev->end_time > pool.budget) {
            pool.discarded += 1 + static_cast<std::size_t>(pool.exec->in_flight());
            pool.over_budget = true;
            break;
        }
        pool.release(ev->worker, ev->end_time);
        scored.emplace_back(record(*ev), ev->job.config);
    }
    pool.barrier(pool.exec->now());
    return scored;
}

inline std::vector<Configuration> top_fraction(
    std::vector<std::pair<double, Configuration>> scored, int eta) {
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    const std::size_t keep = scored.size() / static_cast<std::size_t>(eta);
    std::vector<Configuration> out;
    out.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) out.push_back(scored[i].second);
    return out;
}

}  // namespace detail

struct ShaOutcome {
    MeasurementStore store;
    std::vector<std::vector<Configuration>> rung_survivors;
    std::vector<double> idle_per_worker;
    double idle_seconds = 0.0;
    double end_time = 0.0;
    std::size_t completed = 0;
    std::size_t discarded = 0;
};

/// One synchronous successive-halving bracket over a simulated worker pool:
/// evaluate every config of a rung, wait for the barrier, promote the top
/// 1/eta, repeat.
inline ShaOutcome sha_run_bracket(const BracketSchedule& schedule,
                                  std::vector<Configuration> configs, Objective& objective,
                                  int workers,
                                  double budget = std::numeric_limits<double>::infinity(),
                                  std::vector<double> speed_factors = {}) {
    if (schedule.rungs.empty()) throw std::invalid_argument("sha_run_bracket: empty schedule");
    if (configs.size() != static_cast<std::size_t>(schedule.rungs.front().n))
        throw std::invalid_argument("sha_run_bracket: need exactly n_1 configs");

    SimExecutor exec(objective, workers, std::move(speed_factors));
    detail::PoolState pool(exec, budget);
    ShaOutcome out{MeasurementStore(objective.space(), objective.tuner()), {}, {}, 0.0, 0.0, 0, 0};

    const detail::RecordFn record = [&](const CompletionEvent& ev) {
        Measurement m;
        m.config = ev.job.config;
        m.y = ev.result.y;
        m.level = ev.job.level;
        m.bracket_id = ev.job.bracket_id;
        m.sim_time_start = ev.start_time;
        m.sim_time_end = ev.end_time;
        m.worker_id = ev.worker;
        m.failed = ev.result.failed;
        out.store.record(m);
        ++out.completed;
        return out.store.group(ev.job.level).back().y;
    };

    auto current = std::move(configs);
    for (std::size_t i = 0; i < schedule.rungs.size(); ++i) {
        if (current.empty() || pool.over_budget || exec.now() >= budget) break;
        const int level = detail::level_of_resource(schedule.rungs[i].r, objective.tuner());
        const auto scored = detail::run_rung(pool, current, level, schedule.index,
                                             i == 0 ? JobKind::Fresh : JobKind::Promotion,
                                             record);
        if (i + 1 < schedule.rungs.size()) {
            current = detail::top_fraction(scored, objective.tuner().eta);
            out.rung_survivors.push_back(current);
        }
    }
    out.idle_per_worker = pool.idle;
    out.idle_seconds = pool.total_idle();
    out.end_time = std::min(exec.now(), budget);
    out.discarded = pool.discarded;
    return out;
}

namespace detail {

class Engine {
public:
    Engine(Objective& objective, const EngineOptions& options)
        : obj_(objective),
          opt_(options),
          tuner_(objective.tuner()),
          space_(objective.space()),
          store_(objective.space(), objective.tuner()),
          sampler_rng_(mix_seed(options.seed, 0x5Au)),
          alloc_rng_(mix_seed(options.seed, 0xA1u)),
          alloc_state_(objective.tuner().levels()) {
        if (opt_.n_workers < 1) throw std::invalid_argument("run_experiment: n_workers >= 1");
        if (!(opt_.time_budget_s >= 0.0))
            throw std::invalid_argument("run_experiment: time budget must be >= 0");
        const int K = tuner_.levels();
        if (opt_.fixed_bracket && (*opt_.fixed_bracket < 1 || *opt_.fixed_bracket > K))
            throw std::invalid_argument("run_experiment: fixed bracket outside 1..K");
        if (opt_.variant == SchedulerVariant::Asha && !opt_.fixed_bracket)
            opt_.fixed_bracket = 1;
        if (opt_.variant == SchedulerVariant::Random) opt_.sampler = SamplerKind::Random;
        alloc_state_.samples = opt_.allocator_samples;
        alloc_state_.round_robin_multiplier = opt_.round_robin_multiplier;
        theta_.assign(static_cast<std::size_t>(K), 1.0 / static_cast<double>(K));
        weights_ = uniform_weights();
        bases_.assign(static_cast<std::size_t>(K), nullptr);
    }

    ExperimentResult run() {
        if (opt_.real_time) {
            RealExecutor exec(obj_, opt_.n_workers);
            return run_with(exec);
        }
        SimExecutor exec(obj_, opt_.n_workers, opt_.worker_speed_factors);
        return run_with(exec);
    }

private:
    ExperimentResult run_with(Executor& exec) {
        PoolState pool(exec, opt_.time_budget_s);
        switch (opt_.variant) {
        case SchedulerVariant::Dasha:
        case SchedulerVariant::Asha:
        case SchedulerVariant::Random:
            run_async(pool);
            break;
        case SchedulerVariant::Sha:
        case SchedulerVariant::Hyperband:
            run_sync(pool);
            break;
        }
        ExperimentResult result{std::move(trajectory_), std::move(store_), pool.idle,
                                pool.total_idle(), std::move(promotions_), completed_,
                                pool.discarded, std::min(exec.now(), opt_.time_budget_s),
                                best_y_, best_true_, time_to_target_};
        return result;
    }

    void run_async(PoolState& pool) {
        Executor& exec = *pool.exec;
        for (;;) {
            for (int w = 0; w < exec.workers() && !stop_; ++w) {
                if (pool.busy[static_cast<std::size_t>(w)]) continue;
                if (exec.now() >= pool.budget) break;
                const Job job = next_job();
                pending_.add(space_, job.config);
                pool.dispatch(w, job);
            }
            if (stop_ || exec.in_flight() == 0) break;
            auto ev = exec.wait_next();
            if (!ev) break;
            if (ev->end_time > pool.budget) {
                pool.discarded += 1 + static_cast<std::size_t>(exec.in_flight());
                break;
            }
            pool.release(ev->worker, ev->end_time);
            pending_.remove(space_, ev->job.config);
            record_completion(*ev);
        }
    }

    void run_sync(PoolState& pool) {
        const auto schedules = hyperband_schedule(
            static_cast<int>(tuner_.resource_units(tuner_.levels())), tuner_.eta);
        const std::size_t n_brackets =
            opt_.variant == SchedulerVariant::Sha ? 1 : schedules.size();
        const RecordFn record = [this](const CompletionEvent& ev) {
            return record_completion(ev);
        };
        while (!stop_ && !pool.over_budget && pool.exec->now() < pool.budget) {
            for (std::size_t b = 0; b < n_brackets; ++b) {
                if (stop_ || pool.over_budget || pool.exec->now() >= pool.budget) break;
                const auto& schedule = schedules[b];
                std::vector<Configuration> current;
                for (int i = 0; i < schedule.rungs.front().n; ++i) current.push_back(sample());
                for (std::size_t i = 0; i < schedule.rungs.size(); ++i) {
                    if (current.empty() || stop_ || pool.over_budget ||
                        pool.exec->now() >= pool.budget)
                        break;
                    const int level = level_of_resource(schedule.rungs[i].r, tuner_);
                    const auto scored =
                        run_rung(pool, current, level, schedule.index,
                                 i == 0 ? JobKind::Fresh : JobKind::Promotion, record);
                    if (i + 1 < schedule.rungs.size())
                        current = top_fraction(scored, tuner_.eta);
                }
            }
        }
    }

    Job next_job() {
        const int K = tuner_.levels();
        if (opt_.variant == SchedulerVariant::Random) {
            Job job;
            job.config = sample();
            job.level = K;
            job.bracket_id = K;
            job.kind = JobKind::Fresh;
            return job;
        }
        const int lowest = opt_.fixed_bracket.value_or(1);
        const bool delayed = opt_.variant == SchedulerVariant::Dasha;
        if (auto job = find_promotion(store_, tuner_, lowest, delayed)) {
            const int k = job->level - 1;
            promotions_.push_back(PromotionEvent{config_key(space_, job->config), k,
                                                 now_hint_, store_.count(k),
                                                 store_.count(k + 1)});
            return *job;
        }
        Job job;
        job.bracket_id =
            opt_.fixed_bracket ? *opt_.fixed_bracket : choose_bracket(alloc_state_, weights_, alloc_rng_);
        job.level = job.bracket_id;  // ladder b starts at level b
        job.kind = JobKind::Fresh;
        job.config = sample();
        return job;
    }

    Configuration sample() {
        if (opt_.sampler == SamplerKind::Model) {
            EnsembleSurrogate ens(bases_, theta_);
            return suggest(space_, store_, pending_, ens, tuner_,
                           mix_seed(mix_seed(opt_.seed, 0x500u), suggest_calls_++),
                           opt_.suggest);
        }
        return sample_random(space_, sampler_rng_);
    }

    double record_completion(const CompletionEvent& ev) {
        now_hint_ = ev.end_time;
        Measurement m;
        m.config = ev.job.config;
        m.y = ev.result.y;
        m.level = ev.job.level;
        m.bracket_id = ev.job.bracket_id;
        m.sim_time_start = ev.start_time;
        m.sim_time_end = ev.end_time;
        m.worker_id = ev.worker;
        m.failed = ev.result.failed;
        store_.record(m);
        ++completed_;
        const auto& stored = store_.group(ev.job.level).back();

        const bool valid = !stored.failed;
        if (valid) {
            if (!best_y_ || stored.y < *best_y_) best_y_ = stored.y;
            if (const auto truth = obj_.true_value(stored.config))
                if (!best_true_ || *truth < *best_true_) best_true_ = *truth;
        }
        if (best_y_) {
            const double t = trajectory_.empty()
                                 ? ev.end_time
                                 : std::max(ev.end_time, trajectory_.back().wall_clock);
            trajectory_.push_back(TrajectoryPoint{t, *best_y_, ev.job.level,
                                                  config_id(config_key(space_, stored.config)),
                                                  ev.job.bracket_id});
        }
        check_targets(ev.end_time);
        maybe_refresh(ev.job.level);
        return stored.y;
    }

    void check_targets(double at) {
        if (time_to_target_) return;
        bool reached = false;
        if (opt_.target_y && best_y_ && *best_y_ <= *opt_.target_y) reached = true;
        if (opt_.target_regret && best_true_) {
            if (const auto opt = obj_.optimum();
                opt && *best_true_ - *opt <= *opt_.target_regret)
                reached = true;
        }
        if (reached) {
            time_to_target_ = at;
            stop_ = true;
        }
    }

    void maybe_refresh(int completed_level) {
        const bool needs_alloc =
            opt_.variant == SchedulerVariant::Dasha && !opt_.fixed_bracket;
        const bool needs_model = opt_.sampler == SamplerKind::Model;
        if (!needs_alloc && !needs_model) return;
        ++since_refresh_;
        if (completed_level != tuner_.levels() && since_refresh_ < opt_.refresh_interval)
            return;
        since_refresh_ = 0;
        const int K = tuner_.levels();
        theta_ = estimate_theta(space_, store_, tuner_, alloc_state_.samples,
                                mix_seed(mix_seed(opt_.seed, 0x7E7Au), refreshes_++),
                                opt_.forest);
        if (needs_alloc) {
            std::size_t valid_complete = 0;
            for (const auto& m : store_.group(K))
                if (!m.failed) ++valid_complete;
            weights_ = valid_complete >= 2 ? bracket_weights(theta_, tuner_)
                                           : uniform_weights();
        }
        if (needs_model) {
            for (int level = 1; level <= K; ++level)
                bases_[static_cast<std::size_t>(level - 1)] =
                    fit_base(space_, store_, level,
                             mix_seed(mix_seed(opt_.seed, 0xBA5Eu),
                                      static_cast<std::uint64_t>(level)),
                             opt_.forest);
        }
    }

    BracketWeights uniform_weights() const {
        const auto K = static_cast<std::size_t>(tuner_.levels());
        BracketWeights w;
        w.theta.assign(K, 1.0 / static_cast<double>(K));
        w.cost.resize(K);
        for (std::size_t i = 0; i < K; ++i)
            w.cost[i] = 1.0 / static_cast<double>(tuner_.resource_units(static_cast<int>(i) + 1));
        w.w.assign(K, 1.0 / static_cast<double>(K));
        return w;
    }

    int config_id(const std::string& key) {
        const auto it = config_ids_.find(key);
        if (it != config_ids_.end()) return it->second;
        const int id = static_cast<int>(config_ids_.size()) + 1;
        config_ids_.emplace(key, id);
        return id;
    }

    Objective& obj_;
    EngineOptions opt_;
    TunerParams tuner_;
    const SearchSpace& space_;
    MeasurementStore store_;
    PendingSet pending_;
    Rng sampler_rng_;
    Rng alloc_rng_;
    AllocatorState alloc_state_;
    std::vector<double> theta_;
    BracketWeights weights_;
    std::vector<std::shared_ptr<SurrogateModel>> bases_;
    std::vector<TrajectoryPoint> trajectory_;
    std::vector<PromotionEvent> promotions_;
    std::unordered_map<std::string, int> config_ids_;
    std::optional<double> best_y_;
    std::optional<double> best_true_;
    std::optional<double> time_to_target_;
    std::size_t completed_ = 0;
    std::uint64_t suggest_calls_ = 0;
    std::uint64_t refreshes_ = 0;
    int since_refresh_ = 0;
    double now_hint_ = 0.0;
    bool stop_ = false;
};

}  // namespace detail

/// Runs one tuning experiment: repeatedly fills idle workers by picking a
/// bracket, obtaining a job from the scheduler, dispatching it, and folding
/// completions back into the measurement store until the time budget is
/// spent. Jobs still in flight at the budget are discarded.
inline ExperimentResult run_experiment(Objective& objective, const EngineOptions& options) {
    detail::Engine engine(objective, options);
    return engine.run();
}

/// Synchronous Hyperband: cycles the bracket table until the budget is
/// exhausted.
inline ExperimentResult hyperband_run(Objective& objective, int workers, double budget,
                                      std::uint64_t seed,
                                      std::vector<double> speed_factors = {}) {
    EngineOptions options;
    options.variant = SchedulerVariant::Hyperband;
    options.sampler = SamplerKind::Random;
    options.n_workers = workers;
    options.time_budget_s = budget;
    options.seed = seed;
    options.worker_speed_factors = std::move(speed_factors);
    return run_experiment(objective, options);
}

}  // namespace hypertune
