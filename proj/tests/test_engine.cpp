#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "hypertune/engine.hpp"

using namespace hypertune;

namespace {

EngineOptions slim_options() {
    EngineOptions options;
    options.suggest.n_random = 150;
    options.suggest.n_chains = 4;
    options.suggest.chain_length = 5;
    options.forest.n_trees = 10;
    options.suggest.forest = options.forest;
    return options;
}

std::vector<std::string> sorted_keys(const SearchSpace& space,
                                     const std::vector<Configuration>& configs) {
    std::vector<std::string> keys;
    for (const auto& c : configs) keys.push_back(config_key(space, c));
    std::sort(keys.begin(), keys.end());
    return keys;
}

}  // namespace

TEST_CASE("resource units map back to ladder levels") {
    const TunerParams tuner(3, 27);
    REQUIRE(detail::level_of_resource(1.0, tuner) == 1);
    REQUIRE(detail::level_of_resource(3.0, tuner) == 2);
    REQUIRE(detail::level_of_resource(9.0, tuner) == 3);
    REQUIRE(detail::level_of_resource(27.0, tuner) == 4);
    REQUIRE(detail::level_of_resource(0.5, tuner) == 1);
}

TEST_CASE("successive halving keeps exactly the brute-force survivors") {
    NoisyParaboloidObjective obj(2, 0.0, TunerParams(3, 27), 11);
    const auto schedule = hyperband_schedule(27, 3).front();
    REQUIRE(schedule.rungs.front().n == 27);

    Rng rng(99);
    std::vector<Configuration> configs;
    for (int i = 0; i < 27; ++i) configs.push_back(sample_random(obj.space(), rng));

    auto outcome = sha_run_bracket(schedule, configs, obj, 4);
    REQUIRE(outcome.rung_survivors.size() == 3);
    REQUIRE(outcome.completed == 40);
    REQUIRE(outcome.store.count(1) == 27);
    REQUIRE(outcome.store.count(2) == 9);
    REQUIRE(outcome.store.count(3) == 3);
    REQUIRE(outcome.store.count(4) == 1);

    auto expect_top = [&](std::vector<Configuration> pool, std::size_t keep) {
        std::stable_sort(pool.begin(), pool.end(),
                         [&](const Configuration& a, const Configuration& b) {
                             return *obj.true_value(a) < *obj.true_value(b);
                         });
        pool.resize(keep);
        return pool;
    };

    auto survivors = expect_top(configs, 9);
    REQUIRE(sorted_keys(obj.space(), outcome.rung_survivors[0]) ==
            sorted_keys(obj.space(), survivors));
    survivors = expect_top(survivors, 3);
    REQUIRE(sorted_keys(obj.space(), outcome.rung_survivors[1]) ==
            sorted_keys(obj.space(), survivors));
    survivors = expect_top(survivors, 1);
    REQUIRE(sorted_keys(obj.space(), outcome.rung_survivors[2]) ==
            sorted_keys(obj.space(), survivors));
}

TEST_CASE("synchronous rungs wait for the straggler") {
    NoisyParaboloidObjective obj(1, 0.0, TunerParams(3, 27), 5);
    BracketSchedule schedule;
    schedule.index = 1;
    schedule.rungs = {Rung{4, 1.0}, Rung{1, 3.0}};

    Rng rng(7);
    std::vector<Configuration> configs;
    for (int i = 0; i < 4; ++i) configs.push_back(sample_random(obj.space(), rng));

    auto outcome = sha_run_bracket(schedule, configs, obj, 2,
                                   std::numeric_limits<double>::infinity(), {1.0, 10.0});
    REQUIRE(outcome.completed == 5);
    REQUIRE(outcome.store.count(2) == 1);
    // The rung-2 job starts only after the 10x-slow worker finishes rung 1.
    REQUIRE(outcome.store.group(2).front().sim_time_start == Catch::Approx(10.0));
    REQUIRE(outcome.end_time == Catch::Approx(13.0));
    REQUIRE(outcome.idle_per_worker[0] == Catch::Approx(7.0));
    REQUIRE(outcome.idle_per_worker[1] == Catch::Approx(3.0));
    REQUIRE(outcome.idle_seconds == Catch::Approx(10.0));
}

TEST_CASE("sha_run_bracket validates its inputs") {
    NoisyParaboloidObjective obj(1, 0.0, TunerParams(3, 27), 5);
    BracketSchedule empty;
    REQUIRE_THROWS_AS(sha_run_bracket(empty, {}, obj, 1), std::invalid_argument);

    BracketSchedule schedule;
    schedule.rungs = {Rung{4, 1.0}};
    REQUIRE_THROWS_AS(sha_run_bracket(schedule, {}, obj, 1), std::invalid_argument);
}

TEST_CASE("experiments replay identically from the same seed") {
    auto options = slim_options();
    options.variant = SchedulerVariant::Dasha;
    options.sampler = SamplerKind::Model;
    options.n_workers = 4;
    options.time_budget_s = 600.0;
    options.seed = 21;

    CountingOnesObjective obj_a(2, 2, TunerParams(3, 27), 21);
    CountingOnesObjective obj_b(2, 2, TunerParams(3, 27), 21);
    const auto a = run_experiment(obj_a, options);
    const auto b = run_experiment(obj_b, options);

    REQUIRE(a.completed > 10);
    REQUIRE(a.trajectory == b.trajectory);
    REQUIRE(a.completed == b.completed);
    REQUIRE(a.promotions.size() == b.promotions.size());
    REQUIRE(a.best_y == b.best_y);
}

TEST_CASE("trajectories are monotone and well formed") {
    auto options = slim_options();
    options.variant = SchedulerVariant::Dasha;
    options.sampler = SamplerKind::Random;
    options.n_workers = 4;
    options.time_budget_s = 2000.0;
    options.seed = 3;
    options.allocator_samples = 25;
    options.refresh_interval = 50;

    NoisyParaboloidObjective obj(2, 1.0, TunerParams(3, 27), 3);
    const auto result = run_experiment(obj, options);
    REQUIRE(result.trajectory.size() > 20);
    REQUIRE(result.best_y);
    REQUIRE(result.trajectory.back().best_y == *result.best_y);

    for (std::size_t i = 1; i < result.trajectory.size(); ++i) {
        REQUIRE(result.trajectory[i].wall_clock >= result.trajectory[i - 1].wall_clock);
        REQUIRE(result.trajectory[i].best_y <= result.trajectory[i - 1].best_y);
    }
    for (const auto& p : result.trajectory) {
        REQUIRE(p.level >= 1);
        REQUIRE(p.level <= 4);
        REQUIRE(p.config_id >= 1);
        REQUIRE(p.bracket >= 1);
        REQUIRE(p.bracket <= 4);
        REQUIRE(p.wall_clock <= options.time_budget_s);
    }
}

TEST_CASE("delayed promotions never fire below the eta ratio") {
    auto options = slim_options();
    options.variant = SchedulerVariant::Dasha;
    options.sampler = SamplerKind::Random;
    options.n_workers = 4;
    options.time_budget_s = 2500.0;
    options.seed = 17;
    options.allocator_samples = 25;
    options.refresh_interval = 50;

    NoisyParaboloidObjective obj(2, 1.0, TunerParams(3, 27), 17);
    const auto result = run_experiment(obj, options);
    REQUIRE_FALSE(result.promotions.empty());

    std::set<std::pair<std::string, int>> seen;
    for (const auto& p : result.promotions) {
        REQUIRE(static_cast<double>(p.d_from) >=
                3.0 * (static_cast<double>(p.d_next) + 1.0));
        REQUIRE(p.from_level >= 1);
        REQUIRE(p.from_level <= 3);
        const auto id = std::make_pair(p.key, p.from_level);
        REQUIRE(seen.insert(id).second);  // promoted once per (config, level)
    }
}

TEST_CASE("asynchronous dispatch leaves workers busy") {
    auto options = slim_options();
    options.variant = SchedulerVariant::Dasha;
    options.sampler = SamplerKind::Random;
    options.n_workers = 8;
    options.time_budget_s = 1500.0;
    options.seed = 9;
    options.allocator_samples = 25;
    options.refresh_interval = 50;
    options.worker_speed_factors = {1.0, 1.0, 2.0, 1.0, 1.0, 3.0, 1.0, 1.0};

    NoisyParaboloidObjective obj(2, 1.0, TunerParams(3, 27), 9);
    const auto result = run_experiment(obj, options);
    REQUIRE(result.completed > 50);
    REQUIRE(result.idle_seconds == 0.0);
    for (double idle : result.idle_per_worker) REQUIRE(idle == 0.0);
}

TEST_CASE("asha pins every fresh job to the lowest ladder") {
    auto options = slim_options();
    options.variant = SchedulerVariant::Asha;
    options.sampler = SamplerKind::Random;
    options.n_workers = 4;
    options.time_budget_s = 800.0;
    options.seed = 13;

    NoisyParaboloidObjective obj(2, 1.0, TunerParams(3, 27), 13);
    const auto result = run_experiment(obj, options);
    REQUIRE(result.completed > 20);
    for (int level = 1; level <= 4; ++level)
        for (const auto& m : result.store.group(level)) REQUIRE(m.bracket_id == 1);
}

TEST_CASE("reaching the target stops the run and stamps the time") {
    auto options = slim_options();
    options.variant = SchedulerVariant::Random;
    options.n_workers = 2;
    options.time_budget_s = 100000.0;
    options.seed = 29;
    options.target_regret = 0.05;

    NoisyParaboloidObjective obj(2, 1.0, TunerParams(3, 27), 29);
    const auto result = run_experiment(obj, options);
    REQUIRE(result.time_to_target);
    REQUIRE(*result.time_to_target <= result.end_time);
    REQUIRE(result.best_true);
    REQUIRE(*result.best_true <= 0.05);
    REQUIRE(result.end_time < options.time_budget_s);  // stopped early
}

TEST_CASE("target_y stamps the first trajectory point at or below it") {
    auto options = slim_options();
    options.variant = SchedulerVariant::Random;
    options.n_workers = 1;
    options.time_budget_s = 50000.0;
    options.seed = 31;
    options.target_y = -0.6;

    CountingOnesObjective obj(2, 2, TunerParams(3, 27), 31);
    const auto result = run_experiment(obj, options);
    REQUIRE(result.time_to_target);
    double first = -1.0;
    for (const auto& p : result.trajectory)
        if (p.best_y <= -0.6) { first = p.wall_clock; break; }
    REQUIRE(first == *result.time_to_target);
}

TEST_CASE("work still in flight at the budget is discarded") {
    auto options = slim_options();
    options.variant = SchedulerVariant::Random;
    options.n_workers = 4;
    options.time_budget_s = 10.0;
    options.seed = 2;

    NoisyParaboloidObjective obj(2, 1.0, TunerParams(3, 27), 2);
    const auto result = run_experiment(obj, options);
    REQUIRE(result.completed == 0);
    REQUIRE(result.discarded == 4);
    REQUIRE(result.trajectory.empty());
    REQUIRE_FALSE(result.best_y);
    REQUIRE(result.end_time == 10.0);
}

TEST_CASE("hyperband cycles the bracket table") {
    NoisyParaboloidObjective obj(2, 1.0, TunerParams(3, 27), 41);
    const auto result = hyperband_run(obj, 1, 423.0, 41);
    REQUIRE(result.completed == 69);
    REQUIRE(result.store.count(1) == 27);
    REQUIRE(result.store.count(2) == 21);
    REQUIRE(result.store.count(3) == 13);
    REQUIRE(result.store.count(4) == 8);
    REQUIRE(result.idle_seconds == 0.0);

    std::set<int> brackets;
    for (int level = 1; level <= 4; ++level)
        for (const auto& m : result.store.group(level)) brackets.insert(m.bracket_id);
    REQUIRE(brackets == std::set<int>{1, 2, 3, 4});

    // One worker runs everything back to back: prefix-sum end times on rung 1.
    const auto& first_rung = result.store.group(1);
    for (std::size_t i = 0; i < first_rung.size(); ++i)
        REQUIRE(first_rung[i].sim_time_end == Catch::Approx(static_cast<double>(i + 1)));
}

TEST_CASE("hyperband with no budget does nothing") {
    NoisyParaboloidObjective obj(2, 1.0, TunerParams(3, 27), 1);
    const auto result = hyperband_run(obj, 2, 0.0, 1);
    REQUIRE(result.completed == 0);
    REQUIRE(result.trajectory.empty());
}

TEST_CASE("engine rejects invalid options") {
    NoisyParaboloidObjective obj(2, 1.0, TunerParams(3, 27), 1);
    EngineOptions options;
    options.n_workers = 0;
    REQUIRE_THROWS_AS(run_experiment(obj, options), std::invalid_argument);

    options = EngineOptions{};
    options.fixed_bracket = 9;
    REQUIRE_THROWS_AS(run_experiment(obj, options), std::invalid_argument);

    options = EngineOptions{};
    options.time_budget_s = -1.0;
    REQUIRE_THROWS_AS(run_experiment(obj, options), std::invalid_argument);

    options = EngineOptions{};
    options.n_workers = 2;
    options.worker_speed_factors = {1.0};
    REQUIRE_THROWS_AS(run_experiment(obj, options), std::invalid_argument);
}
