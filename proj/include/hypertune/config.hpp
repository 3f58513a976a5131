#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hypertune/engine.hpp"
#include "hypertune/objectives.hpp"
#include "hypertune/search_space.hpp"
#include "hypertune/subprocess.hpp"
#include "hypertune/tabular.hpp"

namespace hypertune {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ObjectiveSpec {
    std::string kind;  // counting_ones | noisy_paraboloid | tabular | subprocess
    // counting_ones
    int d_cat = 4;
    int d_cont = 4;
    int b_base = 9;
    // counting_ones / noisy_paraboloid
    double unit_cost = 1.0;
    // noisy_paraboloid
    int d = 2;
    double alpha = 1.0;
    std::vector<double> x_star;
    bool resumable = false;
    // tabular
    std::string path;
    // subprocess
    std::string command;
    double timeout_seconds = 0.0;
    std::vector<ParamSpec> params;

    bool operator==(const ObjectiveSpec&) const = default;
};

struct ExperimentConfig {
    int schema_version = 1;
    ObjectiveSpec objective;
    SchedulerVariant scheduler = SchedulerVariant::Dasha;
    SamplerKind sampler = SamplerKind::Model;
    TunerParams tuner{3, 27};
    int n_workers = 1;
    double time_budget_s = 100.0;
    std::vector<std::uint64_t> seeds;
    int allocator_samples = 100;
    int round_robin_multiplier = 3;
    std::optional<int> fixed_bracket;
    std::vector<double> worker_speed_factors;
    std::optional<double> target_y;
    std::optional<double> target_regret;
    SuggestOptions suggest{};
    ForestOptions forest{};
    int refresh_interval = 10;
    std::string output_dir = "hypertune-out";

    bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

inline void check_keys(const nlohmann::json& obj, const std::vector<std::string>& allowed,
                       const std::string& ctx) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw ConfigError("unknown key '" + it.key() + "' in " + ctx);
}

inline const nlohmann::json& need(const nlohmann::json& obj, const char* key,
                                  const std::string& ctx) {
    if (!obj.contains(key)) throw ConfigError(ctx + ": missing key '" + key + "'");
    return obj.at(key);
}

template <typename T>
T as(const nlohmann::json& value, const std::string& ctx) {
    try {
        return value.get<T>();
    } catch (const std::exception&) {
        throw ConfigError(ctx + ": wrong type");
    }
}

template <typename T>
void opt_set(const nlohmann::json& obj, const char* key, T& target, const std::string& ctx) {
    if (obj.contains(key)) target = as<T>(obj.at(key), ctx + "." + key);
}

inline ParamSpec parse_param_spec(const nlohmann::json& j, const std::string& ctx) {
    if (!j.is_object()) throw ConfigError(ctx + ": expected an object");
    const auto type = as<std::string>(need(j, "type", ctx), ctx + ".type");
    const auto name = as<std::string>(need(j, "name", ctx), ctx + ".name");
    if (type == "continuous") {
        check_keys(j, {"name", "type", "lower", "upper", "log"}, ctx);
        bool log = false;
        opt_set(j, "log", log, ctx);
        return ParamSpec::continuous(name, as<double>(need(j, "lower", ctx), ctx + ".lower"),
                                     as<double>(need(j, "upper", ctx), ctx + ".upper"), log);
    }
    if (type == "integer") {
        check_keys(j, {"name", "type", "lower", "upper", "log"}, ctx);
        bool log = false;
        opt_set(j, "log", log, ctx);
        return ParamSpec::integer(name,
                                  as<std::int64_t>(need(j, "lower", ctx), ctx + ".lower"),
                                  as<std::int64_t>(need(j, "upper", ctx), ctx + ".upper"), log);
    }
    if (type == "categorical") {
        check_keys(j, {"name", "type", "choices"}, ctx);
        return ParamSpec::categorical(
            name, as<std::vector<std::string>>(need(j, "choices", ctx), ctx + ".choices"));
    }
    throw ConfigError(ctx + ": unknown param type '" + type + "'");
}

inline nlohmann::json param_spec_json(const ParamSpec& p) {
    nlohmann::json j;
    j["name"] = p.name;
    switch (p.kind) {
    case ParamKind::Continuous:
        j["type"] = "continuous";
        j["lower"] = p.lower;
        j["upper"] = p.upper;
        j["log"] = p.log_scale;
        break;
    case ParamKind::Integer:
        j["type"] = "integer";
        j["lower"] = static_cast<std::int64_t>(p.lower);
        j["upper"] = static_cast<std::int64_t>(p.upper);
        j["log"] = p.log_scale;
        break;
    case ParamKind::Categorical:
        j["type"] = "categorical";
        j["choices"] = p.choices;
        break;
    }
    return j;
}

inline ObjectiveSpec parse_objective_spec(const nlohmann::json& j) {
    const std::string ctx = "objective";
    if (!j.is_object()) throw ConfigError("objective: expected an object");
    ObjectiveSpec spec;
    spec.kind = as<std::string>(need(j, "kind", ctx), "objective.kind");
    if (spec.kind == "counting_ones") {
        check_keys(j, {"kind", "d_cat", "d_cont", "b_base", "unit_cost"}, ctx);
        opt_set(j, "d_cat", spec.d_cat, ctx);
        opt_set(j, "d_cont", spec.d_cont, ctx);
        opt_set(j, "b_base", spec.b_base, ctx);
        opt_set(j, "unit_cost", spec.unit_cost, ctx);
    } else if (spec.kind == "noisy_paraboloid") {
        check_keys(j, {"kind", "d", "alpha", "x_star", "unit_cost", "resumable"}, ctx);
        opt_set(j, "d", spec.d, ctx);
        opt_set(j, "alpha", spec.alpha, ctx);
        opt_set(j, "x_star", spec.x_star, ctx);
        opt_set(j, "unit_cost", spec.unit_cost, ctx);
        opt_set(j, "resumable", spec.resumable, ctx);
    } else if (spec.kind == "tabular") {
        check_keys(j, {"kind", "path"}, ctx);
        spec.path = as<std::string>(need(j, "path", ctx), "objective.path");
    } else if (spec.kind == "subprocess") {
        check_keys(j, {"kind", "command", "timeout_seconds", "params"}, ctx);
        spec.command = as<std::string>(need(j, "command", ctx), "objective.command");
        opt_set(j, "timeout_seconds", spec.timeout_seconds, ctx);
        const auto& params = need(j, "params", ctx);
        if (!params.is_array() || params.empty())
            throw ConfigError("objective.params: expected a non-empty array");
        for (std::size_t i = 0; i < params.size(); ++i)
            spec.params.push_back(
                parse_param_spec(params[i], "objective.params[" + std::to_string(i) + "]"));
    } else {
        throw ConfigError("objective.kind: unknown objective '" + spec.kind + "'");
    }
    return spec;
}

inline nlohmann::json objective_spec_json(const ObjectiveSpec& spec) {
    nlohmann::json j;
    j["kind"] = spec.kind;
    if (spec.kind == "counting_ones") {
        j["d_cat"] = spec.d_cat;
        j["d_cont"] = spec.d_cont;
        j["b_base"] = spec.b_base;
        j["unit_cost"] = spec.unit_cost;
    } else if (spec.kind == "noisy_paraboloid") {
        j["d"] = spec.d;
        j["alpha"] = spec.alpha;
        if (!spec.x_star.empty()) j["x_star"] = spec.x_star;
        j["unit_cost"] = spec.unit_cost;
        j["resumable"] = spec.resumable;
    } else if (spec.kind == "tabular") {
        j["path"] = spec.path;
    } else if (spec.kind == "subprocess") {
        j["command"] = spec.command;
        j["timeout_seconds"] = spec.timeout_seconds;
        auto params = nlohmann::json::array();
        for (const auto& p : spec.params) params.push_back(param_spec_json(p));
        j["params"] = params;
    }
    return j;
}

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    detail::check_keys(
        j,
        {"schema_version", "objective", "scheduler", "sampler", "tuner", "n_workers",
         "time_budget_s", "seeds", "allocator", "fixed_bracket", "worker_speed_factors",
         "target_y", "target_regret", "suggest", "forest", "refresh_interval", "output_dir"},
        "config");

    ExperimentConfig config;
    config.schema_version =
        detail::as<int>(detail::need(j, "schema_version", "config"), "schema_version");
    if (config.schema_version != 1)
        throw ConfigError("schema_version: only version 1 is supported");

    config.objective = detail::parse_objective_spec(detail::need(j, "objective", "config"));

    const auto scheduler_name =
        detail::as<std::string>(detail::need(j, "scheduler", "config"), "scheduler");
    const auto variant = parse_variant(scheduler_name);
    if (!variant)
        throw ConfigError("scheduler: unknown variant '" + scheduler_name +
                          "' (valid: dasha, asha, sha, hyperband, random)");
    config.scheduler = *variant;

    if (j.contains("sampler")) {
        const auto sampler_name = detail::as<std::string>(j.at("sampler"), "sampler");
        const auto sampler = parse_sampler(sampler_name);
        if (!sampler)
            throw ConfigError("sampler: unknown sampler '" + sampler_name +
                              "' (valid: model, random)");
        config.sampler = *sampler;
    } else {
        config.sampler = config.scheduler == SchedulerVariant::Dasha ? SamplerKind::Model
                                                                     : SamplerKind::Random;
    }

    if (j.contains("tuner")) {
        const auto& t = j.at("tuner");
        detail::check_keys(t, {"eta", "max_resource"}, "tuner");
        int eta = 3;
        int max_resource = 27;
        detail::opt_set(t, "eta", eta, "tuner");
        detail::opt_set(t, "max_resource", max_resource, "tuner");
        try {
            config.tuner = TunerParams(eta, max_resource);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("tuner: ") + e.what());
        }
    }

    detail::opt_set(j, "n_workers", config.n_workers, "config");
    if (config.n_workers < 1) throw ConfigError("n_workers: must be >= 1");
    config.time_budget_s =
        detail::as<double>(detail::need(j, "time_budget_s", "config"), "time_budget_s");
    if (!(config.time_budget_s > 0.0)) throw ConfigError("time_budget_s: must be > 0");

    config.seeds = detail::as<std::vector<std::uint64_t>>(detail::need(j, "seeds", "config"),
                                                          "seeds");
    if (config.seeds.empty()) throw ConfigError("seeds: must be non-empty");

    if (j.contains("allocator")) {
        const auto& a = j.at("allocator");
        detail::check_keys(a, {"samples", "round_robin_multiplier"}, "allocator");
        detail::opt_set(a, "samples", config.allocator_samples, "allocator");
        detail::opt_set(a, "round_robin_multiplier", config.round_robin_multiplier,
                        "allocator");
        if (config.allocator_samples < 1) throw ConfigError("allocator.samples: must be >= 1");
        if (config.round_robin_multiplier < 0)
            throw ConfigError("allocator.round_robin_multiplier: must be >= 0");
    }

    if (j.contains("fixed_bracket")) {
        config.fixed_bracket = detail::as<int>(j.at("fixed_bracket"), "fixed_bracket");
        if (*config.fixed_bracket < 1 || *config.fixed_bracket > config.tuner.levels())
            throw ConfigError("fixed_bracket: outside 1.." +
                              std::to_string(config.tuner.levels()));
    }
    if (j.contains("worker_speed_factors")) {
        config.worker_speed_factors = detail::as<std::vector<double>>(
            j.at("worker_speed_factors"), "worker_speed_factors");
        if (config.worker_speed_factors.size() != static_cast<std::size_t>(config.n_workers))
            throw ConfigError("worker_speed_factors: need one entry per worker");
    }
    if (j.contains("target_y"))
        config.target_y = detail::as<double>(j.at("target_y"), "target_y");
    if (j.contains("target_regret"))
        config.target_regret = detail::as<double>(j.at("target_regret"), "target_regret");

    if (j.contains("suggest")) {
        const auto& s = j.at("suggest");
        detail::check_keys(s, {"n_random", "n_chains", "chain_length", "impute_pending"},
                           "suggest");
        detail::opt_set(s, "n_random", config.suggest.n_random, "suggest");
        detail::opt_set(s, "n_chains", config.suggest.n_chains, "suggest");
        detail::opt_set(s, "chain_length", config.suggest.chain_length, "suggest");
        detail::opt_set(s, "impute_pending", config.suggest.impute_pending, "suggest");
    }
    if (j.contains("forest")) {
        const auto& f = j.at("forest");
        detail::check_keys(
            f, {"n_trees", "max_depth", "min_samples_split", "feature_fraction", "bootstrap"},
            "forest");
        detail::opt_set(f, "n_trees", config.forest.n_trees, "forest");
        detail::opt_set(f, "max_depth", config.forest.max_depth, "forest");
        detail::opt_set(f, "min_samples_split", config.forest.min_samples_split, "forest");
        detail::opt_set(f, "feature_fraction", config.forest.feature_fraction, "forest");
        detail::opt_set(f, "bootstrap", config.forest.bootstrap, "forest");
        if (config.forest.n_trees < 1) throw ConfigError("forest.n_trees: must be >= 1");
    }
    detail::opt_set(j, "refresh_interval", config.refresh_interval, "config");
    if (config.refresh_interval < 1) throw ConfigError("refresh_interval: must be >= 1");
    detail::opt_set(j, "output_dir", config.output_dir, "config");
    config.suggest.forest = config.forest;
    return config;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

inline std::string serialize_config(const ExperimentConfig& config) {
    nlohmann::json j;
    j["schema_version"] = config.schema_version;
    j["objective"] = detail::objective_spec_json(config.objective);
    j["scheduler"] = to_string(config.scheduler);
    j["sampler"] = to_string(config.sampler);
    j["tuner"] = {{"eta", config.tuner.eta}, {"max_resource", config.tuner.max_resource}};
    j["n_workers"] = config.n_workers;
    j["time_budget_s"] = config.time_budget_s;
    j["seeds"] = config.seeds;
    j["allocator"] = {{"samples", config.allocator_samples},
                      {"round_robin_multiplier", config.round_robin_multiplier}};
    if (config.fixed_bracket) j["fixed_bracket"] = *config.fixed_bracket;
    if (!config.worker_speed_factors.empty())
        j["worker_speed_factors"] = config.worker_speed_factors;
    if (config.target_y) j["target_y"] = *config.target_y;
    if (config.target_regret) j["target_regret"] = *config.target_regret;
    j["suggest"] = {{"n_random", config.suggest.n_random},
                    {"n_chains", config.suggest.n_chains},
                    {"chain_length", config.suggest.chain_length},
                    {"impute_pending", config.suggest.impute_pending}};
    j["forest"] = {{"n_trees", config.forest.n_trees},
                   {"max_depth", config.forest.max_depth},
                   {"min_samples_split", config.forest.min_samples_split},
                   {"feature_fraction", config.forest.feature_fraction},
                   {"bootstrap", config.forest.bootstrap}};
    j["refresh_interval"] = config.refresh_interval;
    j["output_dir"] = config.output_dir;
    return j.dump(2) + "\n";
}

/// Builds the objective named by the config. Each run seeds its objective
/// from the run seed so stochastic fidelity noise replays exactly.
inline std::unique_ptr<Objective> make_objective(const ExperimentConfig& config,
                                                 std::uint64_t run_seed) {
    const auto& spec = config.objective;
    const auto seed = mix_seed(run_seed, 0x0Bu);
    if (spec.kind == "counting_ones")
        return counting_ones(spec.d_cat, spec.d_cont, config.tuner, seed, spec.b_base,
                             spec.unit_cost);
    if (spec.kind == "noisy_paraboloid")
        return noisy_paraboloid(spec.d, spec.alpha, config.tuner, seed, spec.x_star,
                                spec.unit_cost, spec.resumable);
    if (spec.kind == "tabular") {
        auto bench = load_tabular(spec.path);
        if (!(bench.tuner() == config.tuner))
            throw ConfigError("tabular file declares eta=" + std::to_string(bench.tuner().eta) +
                              ", max_resource=" + std::to_string(bench.tuner().max_resource) +
                              "; set tuner to match");
        return std::make_unique<TabularObjective>(std::move(bench));
    }
    if (spec.kind == "subprocess") {
        try {
            return std::make_unique<SubprocessObjective>(
                spec.command, SearchSpace(spec.params), config.tuner, spec.timeout_seconds);
        } catch (const SpaceError& e) {
            throw ConfigError(std::string("objective.params: ") + e.what());
        }
    }
    throw ConfigError("objective.kind: unknown objective '" + spec.kind + "'");
}

inline EngineOptions engine_options(const ExperimentConfig& config, std::uint64_t run_seed) {
    EngineOptions options;
    options.variant = config.scheduler;
    options.sampler = config.sampler;
    options.n_workers = config.n_workers;
    options.time_budget_s = config.time_budget_s;
    options.seed = run_seed;
    options.allocator_samples = config.allocator_samples;
    options.round_robin_multiplier = config.round_robin_multiplier;
    options.fixed_bracket = config.fixed_bracket;
    options.worker_speed_factors = config.worker_speed_factors;
    options.target_regret = config.target_regret;
    options.target_y = config.target_y;
    options.suggest = config.suggest;
    options.forest = config.forest;
    options.refresh_interval = config.refresh_interval;
    options.real_time = config.objective.kind == "subprocess";
    return options;
}

}  // namespace hypertune
