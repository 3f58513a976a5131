#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "hypertune/measurement.hpp"
#include "hypertune/search_space.hpp"

using namespace hypertune;

namespace {

SearchSpace one_d() { return SearchSpace({ParamSpec::continuous("x", 0.0, 1.0)}); }

Measurement at(double x, double y, int level, double end = 0.0) {
    Measurement m;
    m.config = Configuration{{x}};
    m.y = y;
    m.level = level;
    m.sim_time_end = end;
    return m;
}

}  // namespace

TEST_CASE("tuner params derive K and resource units") {
    TunerParams t(3, 27);
    REQUIRE(t.levels() == 4);
    REQUIRE(t.resource_units(1) == 1);
    REQUIRE(t.resource_units(2) == 3);
    REQUIRE(t.resource_units(3) == 9);
    REQUIRE(t.resource_units(4) == 27);

    REQUIRE(TunerParams(3, 1).levels() == 1);
    REQUIRE(TunerParams(2, 16).levels() == 5);
    // Non-power R: r_K stays <= R.
    REQUIRE(TunerParams(3, 20).levels() == 3);
    REQUIRE_THROWS_AS(TunerParams(1, 27), std::invalid_argument);
    REQUIRE_THROWS_AS(TunerParams(3, 0), std::invalid_argument);
}

TEST_CASE("record appends to the level group") {
    const auto space = one_d();
    MeasurementStore store(space, TunerParams(3, 27));

    store.record(at(0.5, 0.3, 1));
    REQUIRE(store.count(1) == 1);
    REQUIRE(store.count(2) == 0);
    REQUIRE(store.count(3) == 0);
    REQUIRE(store.count(4) == 0);

    store.record(at(0.5, 0.2, 2));
    REQUIRE(store.count(1) == 1);
    REQUIRE(store.count(2) == 1);
    REQUIRE(store.total() == 2);

    Measurement bad = at(0.5, 0.1, 5);
    REQUIRE_THROWS_AS(store.record(bad), std::invalid_argument);
}

TEST_CASE("27 level-1 records match the first Hyperband rung") {
    const auto space = one_d();
    MeasurementStore store(space, TunerParams(3, 27));
    for (int i = 0; i < 27; ++i) store.record(at(i / 27.0, i / 27.0, 1));
    REQUIRE(store.count(1) == 27);
}

TEST_CASE("total equals sum of group sizes") {
    const auto space = one_d();
    MeasurementStore store(space, TunerParams(3, 27));
    Rng rng(3);
    for (int i = 0; i < 100; ++i)
        store.record(at(rng.uniform(), rng.uniform(), 1 + static_cast<int>(rng.uniform_int(4))));
    std::size_t sum = 0;
    for (int level = 1; level <= 4; ++level) sum += store.count(level);
    REQUIRE(sum == store.total());
    REQUIRE(store.total() == 100);
}

TEST_CASE("failed measurements take the worst-plus-one penalty") {
    const auto space = one_d();
    MeasurementStore store(space, TunerParams(3, 27));
    store.record(at(0.1, 0.4, 1));
    store.record(at(0.2, 0.9, 1));

    Measurement failed = at(0.3, 0.0, 1);
    failed.failed = true;
    store.record(failed);
    REQUIRE(store.group(1)[2].y == Catch::Approx(1.9));

    Measurement nan = at(0.4, std::numeric_limits<double>::quiet_NaN(), 1);
    store.record(nan);
    REQUIRE(store.group(1)[3].failed);
    // The first penalty (1.9) is now the worst finite value.
    REQUIRE(store.group(1)[3].y == Catch::Approx(2.9));
}

TEST_CASE("top_candidates ranks, floors, and excludes promoted") {
    const auto space = one_d();
    MeasurementStore store(space, TunerParams(3, 27));
    store.record(at(0.1, 0.3, 1));
    store.record(at(0.2, 0.1, 1));
    store.record(at(0.3, 0.2, 1));

    auto top = store.top_candidates(1, 3);
    REQUIRE(top.size() == 1);
    REQUIRE(std::get<double>(top[0].values[0]) == Catch::Approx(0.2));

    store.mark_promoted(config_key(space, top[0]), 1);
    REQUIRE(store.top_candidates(1, 3).empty());
}

TEST_CASE("top_candidates is empty below eta points") {
    const auto space = one_d();
    MeasurementStore store(space, TunerParams(3, 27));
    store.record(at(0.1, 0.3, 1));
    store.record(at(0.2, 0.1, 1));
    REQUIRE(store.top_candidates(1, 3).empty());  // floor(2/3) = 0
}

TEST_CASE("top_candidates breaks ties by earlier completion") {
    const auto space = one_d();
    MeasurementStore store(space, TunerParams(3, 27));
    store.record(at(0.1, 0.5, 1, 9.0));
    store.record(at(0.2, 0.5, 1, 3.0));
    store.record(at(0.3, 0.5, 1, 6.0));

    const auto top = store.top_candidates(1, 3);
    REQUIRE(top.size() == 1);
    REQUIRE(std::get<double>(top[0].values[0]) == Catch::Approx(0.2));
}

TEST_CASE("top_candidates length never exceeds the floor") {
    const auto space = one_d();
    MeasurementStore store(space, TunerParams(3, 27));
    Rng rng(17);
    for (int i = 0; i < 40; ++i) {
        store.record(at(rng.uniform(), rng.uniform(), 1));
        const auto top = store.top_candidates(1, 3);
        REQUIRE(top.size() <= store.count(1) / 3);
        for (const auto& c : top) REQUIRE_FALSE(store.is_promoted(config_key(space, c), 1));
    }
}

TEST_CASE("top_candidates rejects the final level") {
    const auto space = one_d();
    MeasurementStore store(space, TunerParams(3, 27));
    REQUIRE_THROWS_AS(store.top_candidates(4, 3), std::invalid_argument);
}

TEST_CASE("promotion flags are single-use") {
    const auto space = one_d();
    MeasurementStore store(space, TunerParams(3, 27));
    store.mark_promoted("x=0.5", 1);
    REQUIRE(store.is_promoted("x=0.5", 1));
    REQUIRE_FALSE(store.is_promoted("x=0.5", 2));
    REQUIRE_THROWS_AS(store.mark_promoted("x=0.5", 1), std::logic_error);
}
