#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <string>

#include "hypertune/tabular.hpp"

using namespace hypertune;
namespace fs = std::filesystem;

namespace {

SearchSpace demo_space() {
    return SearchSpace({
        ParamSpec::continuous("lr", 0.001, 0.1, true),
        ParamSpec::integer("units", 16, 256),
        ParamSpec::categorical("act", {"relu", "tanh"}),
    });
}

fs::path write_table(const std::string& name, const std::string& content) {
    const auto dir = fs::temp_directory_path() / "hypertune-tabular-tests";
    fs::create_directories(dir);
    const auto path = dir / name;
    std::ofstream out(path);
    out << content;
    return path;
}

const std::string kHeader =
    "hypertune-tabular v1\n"
    "param lr continuous 0.001 0.1 log\n"
    "param units integer 16 256\n"
    "param act categorical relu tanh\n"
    "eta 3\n"
    "max_resource 9\n";

}  // namespace

TEST_CASE("config keys round-trip through parse_config_key") {
    const auto space = demo_space();
    Configuration c;
    c.values = {ParamValue{0.01}, ParamValue{std::int64_t{64}}, ParamValue{std::int64_t{1}}};
    const auto key = config_key(space, c);
    REQUIRE(key == "lr=0.01,units=64,act=tanh");
    const auto back = parse_config_key(space, key);
    REQUIRE(back.values == c.values);
}

TEST_CASE("parse_config_key rejects malformed keys") {
    const auto space = demo_space();
    REQUIRE_THROWS_AS(parse_config_key(space, "lr=0.01,units=64"), SpaceError);
    REQUIRE_THROWS_AS(parse_config_key(space, "lr=0.01,units=64,act=gelu"), SpaceError);
    REQUIRE_THROWS_AS(parse_config_key(space, "lr=0.01,units=64,act=relu,lr=0.02"), SpaceError);
    REQUIRE_THROWS_AS(parse_config_key(space, "lr=abc,units=64,act=relu"), SpaceError);
    REQUIRE_THROWS_AS(parse_config_key(space, "lr=0.01,units=6.4,act=relu"), SpaceError);
    REQUIRE_THROWS_AS(parse_config_key(space, "zz=1,units=64,act=relu"), SpaceError);
    REQUIRE_THROWS_AS(parse_config_key(space, "lr0.01,units=64,act=relu"), SpaceError);
    REQUIRE_THROWS_AS(parse_config_key(space, ""), SpaceError);
}

TEST_CASE("load_tabular reads declarations and data rows") {
    const auto path = write_table("basic.tbl",
                                  kHeader +
                                      "# comment line\n"
                                      "\n"
                                      "lr=0.01,units=64,act=relu 1 0.9 10\n"
                                      "lr=0.01,units=64,act=relu 3 0.4 30\n"
                                      "lr=0.05,units=32,act=tanh 1 0.8 12.5\n");
    const auto bench = load_tabular(path.string());
    REQUIRE(bench.space().dimension() == 3);
    REQUIRE(bench.tuner().eta == 3);
    REQUIRE(bench.tuner().levels() == 3);
    REQUIRE_FALSE(bench.resumable());
    REQUIRE(bench.rows() == 3);

    const auto hit = bench.lookup("lr=0.01,units=64,act=relu", 3);
    REQUIRE(hit);
    REQUIRE(hit->y == 0.4);
    REQUIRE(hit->cost == 30.0);
    REQUIRE_FALSE(bench.lookup("lr=0.01,units=64,act=relu", 2));
    REQUIRE_FALSE(bench.lookup("lr=0.09,units=128,act=relu", 1));
}

TEST_CASE("load_tabular canonicalizes config keys") {
    const auto path = write_table("canonical.tbl",
                                  kHeader + "lr=0.0100,units=0064,act=relu 1 0.5 1\n");
    const auto bench = load_tabular(path.string());
    REQUIRE(bench.lookup("lr=0.01,units=64,act=relu", 1));
}

TEST_CASE("load_tabular reports the failing line") {
    auto expect_line = [](const std::string& name, const std::string& content, int line) {
        const auto path = write_table(name, content);
        try {
            load_tabular(path.string());
            FAIL("expected TabularParseError");
        } catch (const TabularParseError& e) {
            REQUIRE(e.line() == line);
        }
    };

    expect_line("no_magic.tbl", "param lr continuous 0 1\n", 1);
    expect_line("empty.tbl", "", 0);
    expect_line("no_rows.tbl", kHeader, 6);
    expect_line("row_before_param.tbl",
                "hypertune-tabular v1\nlr=0.5 1 0.5 1\n", 2);
    expect_line("no_eta.tbl",
                "hypertune-tabular v1\nparam x continuous 0 1\nx=0.5 1 0.5 1\n", 3);
    expect_line("late_param.tbl",
                kHeader + "lr=0.01,units=64,act=relu 1 0.5 1\nparam extra continuous 0 1\n", 8);
    expect_line("bad_level.tbl", kHeader + "lr=0.01,units=64,act=relu 9 0.5 1\n", 7);
    expect_line("bad_cost.tbl", kHeader + "lr=0.01,units=64,act=relu 1 0.5 0\n", 7);
    expect_line("short_row.tbl", kHeader + "lr=0.01,units=64,act=relu 1 0.5\n", 7);
    expect_line("dup_row.tbl",
                kHeader + "lr=0.01,units=64,act=relu 1 0.5 1\n"
                          "lr=0.010,units=64,act=relu 1 0.5 1\n", 8);
    expect_line("bad_param_decl.tbl",
                "hypertune-tabular v1\nparam x gaussian 0 1\n", 2);
}

TEST_CASE("load_tabular names the unknown parameter") {
    const auto path = write_table("unknown_param.tbl",
                                  kHeader + "zz=1,units=64,act=relu 1 0.5 1\n");
    try {
        load_tabular(path.string());
        FAIL("expected TabularParseError");
    } catch (const TabularParseError& e) {
        REQUIRE(e.line() == 7);
        REQUIRE(std::string(e.what()).find("zz") != std::string::npos);
    }
}

TEST_CASE("tabular objective serves hits and fails on misses") {
    const auto path = write_table("objective.tbl",
                                  kHeader +
                                      "resumable true\n"
                                      "lr=0.01,units=64,act=relu 1 0.9 10\n"
                                      "lr=0.01,units=64,act=relu 2 0.6 20\n");
    TabularObjective obj(load_tabular(path.string()));
    REQUIRE(obj.resumable());

    const auto config = parse_config_key(obj.space(), "lr=0.01,units=64,act=relu");
    const auto hit = obj.evaluate(config, 2);
    REQUIRE_FALSE(hit.failed);
    REQUIRE(hit.y == 0.6);
    REQUIRE(hit.cost_seconds == 20.0);
    REQUIRE(obj.cost(config, 2) == 20.0);

    const auto miss = obj.evaluate(config, 3);
    REQUIRE(miss.failed);
    REQUIRE(miss.cost_seconds == 1.0);
    REQUIRE(obj.cost(config, 3) == 1.0);

    const auto stranger = parse_config_key(obj.space(), "lr=0.02,units=48,act=tanh");
    REQUIRE(obj.evaluate(stranger, 1).failed);
}
