#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "hypertune/config.hpp"

using namespace hypertune;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json base_config() {
    return json::parse(R"({
        "schema_version": 1,
        "objective": {"kind": "counting_ones", "d_cat": 2, "d_cont": 2},
        "scheduler": "dasha",
        "time_budget_s": 100,
        "seeds": [1, 2, 3]
    })");
}

void expect_error(const json& j, const std::string& needle) {
    try {
        parse_config(j.dump());
        FAIL("expected ConfigError for " + j.dump());
    } catch (const ConfigError& e) {
        INFO(e.what());
        REQUIRE(std::string(e.what()).find(needle) != std::string::npos);
    }
}

fs::path write_file(const std::string& name, const std::string& content) {
    const auto dir = fs::temp_directory_path() / "hypertune-config-tests";
    fs::create_directories(dir);
    const auto path = dir / name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path;
}

const std::string kTinyTable =
    "hypertune-tabular v1\n"
    "param x continuous 0 1\n"
    "eta 3\n"
    "max_resource 9\n"
    "x=0.5 1 0.25 1\n";

}  // namespace

TEST_CASE("configs survive a parse, serialize, parse cycle") {
    auto j = base_config();
    j["sampler"] = "model";
    j["tuner"] = {{"eta", 3}, {"max_resource", 27}};
    j["n_workers"] = 4;
    j["allocator"] = {{"samples", 50}, {"round_robin_multiplier", 2}};
    j["fixed_bracket"] = 2;
    j["worker_speed_factors"] = {1.0, 1.0, 2.0, 1.0};
    j["target_y"] = -0.9;
    j["suggest"] = {{"n_random", 500}, {"n_chains", 5}};
    j["forest"] = {{"n_trees", 12}};
    j["refresh_interval"] = 5;
    j["output_dir"] = "out";

    const auto config = parse_config(j.dump());
    REQUIRE(config.sampler == SamplerKind::Model);
    REQUIRE(config.suggest.n_random == 500);
    REQUIRE(config.suggest.forest.n_trees == 12);
    REQUIRE(config.forest.n_trees == 12);

    const auto text = serialize_config(config);
    REQUIRE(parse_config(text) == config);
    REQUIRE(serialize_config(parse_config(text)) == text);
}

TEST_CASE("every objective kind round-trips") {
    auto check = [](const json& objective) {
        auto j = base_config();
        j["objective"] = objective;
        if (objective["kind"] == "tabular") j["tuner"] = {{"eta", 3}, {"max_resource", 9}};
        const auto config = parse_config(j.dump());
        REQUIRE(parse_config(serialize_config(config)) == config);
    };

    check(json::parse(R"({"kind": "counting_ones", "d_cat": 3, "d_cont": 5, "b_base": 4,
                          "unit_cost": 0.5})"));
    check(json::parse(R"({"kind": "noisy_paraboloid", "d": 3, "alpha": 0.5,
                          "x_star": [0.1, 0.2, 0.3], "resumable": true})"));
    check(json::parse(R"({"kind": "tabular", "path": "bench.tbl"})"));
    check(json::parse(R"({"kind": "subprocess", "command": "./run.sh",
                          "timeout_seconds": 30,
                          "params": [
                            {"name": "lr", "type": "continuous", "lower": 1e-4,
                             "upper": 1e-1, "log": true},
                            {"name": "units", "type": "integer", "lower": 16, "upper": 256},
                            {"name": "act", "type": "categorical",
                             "choices": ["relu", "tanh"]}
                          ]})"));
}

TEST_CASE("unknown keys are rejected at every nesting level") {
    auto j = base_config();
    j["surprise"] = 1;
    expect_error(j, "unknown key 'surprise' in config");

    j = base_config();
    j["objective"]["alpha"] = 0.5;
    expect_error(j, "unknown key 'alpha' in objective");

    j = base_config();
    j["tuner"] = {{"eta", 3}, {"rungs", 4}};
    expect_error(j, "unknown key 'rungs' in tuner");

    j = base_config();
    j["allocator"] = {{"samples", 10}, {"bootstrap", true}};
    expect_error(j, "unknown key 'bootstrap' in allocator");

    j = base_config();
    j["suggest"] = {{"candidates", 10}};
    expect_error(j, "unknown key 'candidates' in suggest");

    j = base_config();
    j["forest"] = {{"trees", 10}};
    expect_error(j, "unknown key 'trees' in forest");

    j = base_config();
    j["objective"] = {{"kind", "subprocess"},
                      {"command", "x"},
                      {"params", json::array({{{"name", "a"},
                                               {"type", "continuous"},
                                               {"lower", 0},
                                               {"upper", 1},
                                               {"scale", "log"}}})}};
    expect_error(j, "unknown key 'scale' in objective.params[0]");
}

TEST_CASE("missing and malformed fields are named") {
    auto j = base_config();
    j.erase("objective");
    expect_error(j, "missing key 'objective'");

    j = base_config();
    j.erase("schema_version");
    expect_error(j, "missing key 'schema_version'");

    j = base_config();
    j["schema_version"] = 2;
    expect_error(j, "only version 1");

    j = base_config();
    j.erase("seeds");
    expect_error(j, "missing key 'seeds'");

    j = base_config();
    j["seeds"] = json::array();
    expect_error(j, "seeds: must be non-empty");

    j = base_config();
    j.erase("time_budget_s");
    expect_error(j, "missing key 'time_budget_s'");

    j = base_config();
    j["time_budget_s"] = 0;
    expect_error(j, "time_budget_s: must be > 0");

    j = base_config();
    j["scheduler"] = "bohb";
    expect_error(j, "valid: dasha, asha, sha, hyperband, random");

    j = base_config();
    j["sampler"] = "gp";
    expect_error(j, "valid: model, random");

    j = base_config();
    j["n_workers"] = 0;
    expect_error(j, "n_workers: must be >= 1");

    j = base_config();
    j["fixed_bracket"] = 9;
    expect_error(j, "fixed_bracket: outside 1..4");

    j = base_config();
    j["n_workers"] = 2;
    j["worker_speed_factors"] = {1.0};
    expect_error(j, "one entry per worker");

    j = base_config();
    j["allocator"] = {{"samples", 0}};
    expect_error(j, "allocator.samples");

    j = base_config();
    j["forest"] = {{"n_trees", 0}};
    expect_error(j, "forest.n_trees");

    j = base_config();
    j["refresh_interval"] = 0;
    expect_error(j, "refresh_interval");

    j = base_config();
    j["tuner"] = {{"eta", 1}};
    expect_error(j, "tuner: eta must be >= 2");

    j = base_config();
    j["objective"] = {{"kind", "gp_bench"}};
    expect_error(j, "unknown objective 'gp_bench'");

    j = base_config();
    j["objective"] = {{"kind", "subprocess"}, {"command", "x"}, {"params", json::array()}};
    expect_error(j, "objective.params: expected a non-empty array");

    j = base_config();
    j["objective"] = {{"kind", "tabular"}};
    expect_error(j, "missing key 'path'");

    j = base_config();
    j["seeds"] = "all";
    expect_error(j, "seeds: wrong type");

    expect_error(json::array({1, 2}), "expected a JSON object");
    REQUIRE_THROWS_AS(parse_config("not json"), ConfigError);
}

TEST_CASE("sampler defaults follow the scheduler") {
    auto j = base_config();
    REQUIRE(parse_config(j.dump()).sampler == SamplerKind::Model);

    for (const std::string name : {"asha", "sha", "hyperband", "random"}) {
        j["scheduler"] = name;
        REQUIRE(parse_config(j.dump()).sampler == SamplerKind::Random);
    }

    j["scheduler"] = "asha";
    j["sampler"] = "model";
    REQUIRE(parse_config(j.dump()).sampler == SamplerKind::Model);
}

TEST_CASE("serialization omits unset optionals") {
    const auto config = parse_config(base_config().dump());
    const auto text = serialize_config(config);
    REQUIRE(text.find("fixed_bracket") == std::string::npos);
    REQUIRE(text.find("target_y") == std::string::npos);
    REQUIRE(text.find("worker_speed_factors") == std::string::npos);
    REQUIRE(text.back() == '\n');
}

TEST_CASE("objectives are built from the config") {
    auto j = base_config();
    auto obj = make_objective(parse_config(j.dump()), 7);
    REQUIRE(obj->space().dimension() == 4);
    REQUIRE(obj->resumable());
    REQUIRE(*obj->optimum() == -1.0);

    j["objective"] = {{"kind", "noisy_paraboloid"}, {"d", 3}, {"resumable", true}};
    obj = make_objective(parse_config(j.dump()), 7);
    REQUIRE(obj->space().dimension() == 3);
    REQUIRE(obj->resumable());

    const auto table = write_file("make_objective.tbl", kTinyTable);
    j["objective"] = {{"kind", "tabular"}, {"path", table.string()}};
    j["tuner"] = {{"eta", 3}, {"max_resource", 9}};
    obj = make_objective(parse_config(j.dump()), 7);
    REQUIRE(obj->tuner().levels() == 3);

    j["tuner"] = {{"eta", 3}, {"max_resource", 27}};
    REQUIRE_THROWS_WITH(make_objective(parse_config(j.dump()), 7),
                        Catch::Matchers::ContainsSubstring("set tuner to match"));

    j = base_config();
    j["objective"] = {{"kind", "subprocess"},
                      {"command", "echo"},
                      {"params", json::array({{{"name", "x"},
                                               {"type", "continuous"},
                                               {"lower", 0},
                                               {"upper", 1}},
                                              {{"name", "x"},
                                               {"type", "continuous"},
                                               {"lower", 0},
                                               {"upper", 1}}})}};
    REQUIRE_THROWS_WITH(make_objective(parse_config(j.dump()), 7),
                        Catch::Matchers::ContainsSubstring("objective.params:"));
}

TEST_CASE("objective noise replays from the run seed") {
    const auto config = parse_config(base_config().dump());
    auto a = make_objective(config, 11);
    auto b = make_objective(config, 11);
    auto c = make_objective(config, 12);

    Configuration probe;
    probe.values = {ParamValue{std::int64_t{1}}, ParamValue{std::int64_t{0}},
                    ParamValue{0.4}, ParamValue{0.7}};
    REQUIRE(a->evaluate(probe, 1).y == b->evaluate(probe, 1).y);
    REQUIRE(a->evaluate(probe, 2).y == b->evaluate(probe, 2).y);
    const bool differs = a->evaluate(probe, 1).y != c->evaluate(probe, 1).y ||
                         a->evaluate(probe, 2).y != c->evaluate(probe, 2).y;
    REQUIRE(differs);
}

TEST_CASE("engine options mirror the config") {
    auto j = base_config();
    j["scheduler"] = "asha";
    j["n_workers"] = 3;
    j["worker_speed_factors"] = {1.0, 2.0, 3.0};
    j["fixed_bracket"] = 2;
    j["target_regret"] = 0.05;
    j["allocator"] = {{"samples", 64}, {"round_robin_multiplier", 5}};
    j["refresh_interval"] = 7;

    const auto config = parse_config(j.dump());
    const auto options = engine_options(config, 123);
    REQUIRE(options.variant == SchedulerVariant::Asha);
    REQUIRE(options.sampler == SamplerKind::Random);
    REQUIRE(options.n_workers == 3);
    REQUIRE(options.time_budget_s == 100.0);
    REQUIRE(options.seed == 123);
    REQUIRE(options.allocator_samples == 64);
    REQUIRE(options.round_robin_multiplier == 5);
    REQUIRE(options.fixed_bracket == 2);
    REQUIRE(options.worker_speed_factors == std::vector<double>{1.0, 2.0, 3.0});
    REQUIRE(options.target_regret == 0.05);
    REQUIRE_FALSE(options.target_y);
    REQUIRE(options.refresh_interval == 7);
    REQUIRE_FALSE(options.real_time);

    auto sub = base_config();
    sub["objective"] = {{"kind", "subprocess"},
                        {"command", "echo"},
                        {"params", json::array({{{"name", "x"},
                                                 {"type", "continuous"},
                                                 {"lower", 0},
                                                 {"upper", 1}}})}};
    REQUIRE(engine_options(parse_config(sub.dump()), 1).real_time);
}

TEST_CASE("configs load from disk") {
    const auto path = write_file("config.json", base_config().dump());
    const auto config = load_config(path.string());
    REQUIRE(config.objective.kind == "counting_ones");
    REQUIRE_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}
