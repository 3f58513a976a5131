#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hypertune/config.hpp"
#include "hypertune/engine.hpp"
#include "hypertune/trajectory_io.hpp"

namespace hypertune {

struct CliOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<double> budget_s;
    std::optional<std::string> out_dir;
};

namespace detail {

inline int log_level() {
    const char* env = std::getenv("HYPERTUNE_LOG");
    return env ? std::atoi(env) : 0;
}

inline void log(int level, const std::string& msg) {
    if (log_level() >= level) std::cerr << msg << "\n";
}

inline void apply_overrides(ExperimentConfig& config, const CliOverrides& overrides) {
    if (overrides.seed) config.seeds = {*overrides.seed};
    if (overrides.workers) {
        config.n_workers = *overrides.workers;
        if (config.n_workers < 1) throw ConfigError("--workers: must be >= 1");
        if (!config.worker_speed_factors.empty() &&
            config.worker_speed_factors.size() != static_cast<std::size_t>(config.n_workers))
            throw ConfigError("--workers: worker_speed_factors needs one entry per worker");
    }
    if (overrides.budget_s) {
        config.time_budget_s = *overrides.budget_s;
        if (!(config.time_budget_s > 0.0)) throw ConfigError("--budget-seconds: must be > 0");
    }
    if (overrides.out_dir) config.output_dir = *overrides.out_dir;
}

}  // namespace detail

inline std::vector<double> time_grid(double budget, int points = 201) {
    if (points < 2) throw std::invalid_argument("time_grid needs at least 2 points");
    std::vector<double> grid(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) grid[static_cast<std::size_t>(i)] = budget * i / (points - 1);
    return grid;
}

/// Samples the best-y-so-far step function at the grid times. Times before
/// the first record map to NaN.
inline std::vector<double> align_to_grid(const std::vector<TrajectoryPoint>& trajectory,
                                         const std::vector<double>& grid) {
    std::vector<double> out(grid.size(), std::numeric_limits<double>::quiet_NaN());
    std::size_t next = 0;
    double current = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t g = 0; g < grid.size(); ++g) {
        while (next < trajectory.size() && trajectory[next].wall_clock <= grid[g])
            current = trajectory[next++].best_y;
        out[g] = current;
    }
    return out;
}

/// Pointwise mean across runs; NaN wherever any run is still undefined.
inline std::vector<double> mean_series(const std::vector<std::vector<double>>& series) {
    if (series.empty()) throw std::invalid_argument("mean_series of no series");
    const std::size_t n = series.front().size();
    for (const auto& s : series)
        if (s.size() != n) throw std::invalid_argument("mean_series length mismatch");
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        bool defined = true;
        for (const auto& s : series) {
            if (std::isnan(s[i])) {
                defined = false;
                break;
            }
            sum += s[i];
        }
        out[i] = defined ? sum / static_cast<double>(series.size())
                         : std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

inline int cmd_run(const std::string& config_path, const CliOverrides& overrides = {}) {
    try {
        auto config = load_config(config_path);
        detail::apply_overrides(config, overrides);
        std::filesystem::create_directories(config.output_dir);
        const auto out_dir = std::filesystem::path(config.output_dir);

        {
            std::ofstream cfg(out_dir / "config.json", std::ios::binary);
            cfg << serialize_config(config);
        }

        auto runs = nlohmann::json::array();
        std::vector<double> finals;
        std::vector<double> times_to_target;
        bool all_reached = true;
        for (const auto seed : config.seeds) {
            detail::log(1, "run: seed " + std::to_string(seed));
            auto objective = make_objective(config, seed);
            const auto result = run_experiment(*objective, engine_options(config, seed));
            const auto stem = "trajectory_seed" + std::to_string(seed);
            write_trajectory_jsonl((out_dir / (stem + ".jsonl")).string(), result.trajectory);
            write_trajectory_csv((out_dir / (stem + ".csv")).string(), result.trajectory);

            nlohmann::json run;
            run["seed"] = seed;
            run["trajectory"] = stem + ".jsonl";
            run["completed"] = result.completed;
            if (result.best_y) {
                run["final_best_y"] = *result.best_y;
                finals.push_back(*result.best_y);
            } else {
                run["final_best_y"] = nullptr;
            }
            if (result.time_to_target) {
                run["time_to_target"] = *result.time_to_target;
                times_to_target.push_back(*result.time_to_target);
            } else {
                run["time_to_target"] = nullptr;
                all_reached = false;
            }
            runs.push_back(run);
            detail::log(1, "run: seed " + std::to_string(seed) + " done, " +
                               std::to_string(result.completed) + " measurements");
        }

        nlohmann::json summary;
        summary["scheduler"] = to_string(config.scheduler);
        summary["sampler"] = to_string(config.sampler);
        summary["time_budget_s"] = config.time_budget_s;
        summary["n_workers"] = config.n_workers;
        summary["runs"] = runs;
        summary["median_final_best_y"] =
            finals.empty() ? nlohmann::json(nullptr) : nlohmann::json(detail::median(finals));
        summary["best_final_best_y"] =
            finals.empty() ? nlohmann::json(nullptr)
                           : nlohmann::json(*std::min_element(finals.begin(), finals.end()));
        summary["median_time_to_target"] =
            (all_reached && !times_to_target.empty())
                ? nlohmann::json(detail::median(times_to_target))
                : nlohmann::json(nullptr);
        {
            std::ofstream out(out_dir / "summary.json", std::ios::binary);
            if (!out) throw std::runtime_error("cannot write summary.json");
            out << summary.dump(2) << "\n";
        }

        std::cout << "scheduler " << to_string(config.scheduler) << ", " << config.seeds.size()
                  << " seed(s), budget " << detail::format_double(config.time_budget_s)
                  << "s\n";
        if (!finals.empty()) {
            std::cout << "median final best_y " << detail::format_double(detail::median(finals))
                      << "\n";
            std::cout << "best final best_y "
                      << detail::format_double(*std::min_element(finals.begin(), finals.end()))
                      << "\n";
        } else {
            std::cout << "no completed measurements\n";
        }
        std::cout << "artifacts in " << config.output_dir << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

inline int cmd_compare(const std::string& config_path, const std::vector<std::string>& variants,
                       const CliOverrides& overrides = {}) {
    try {
        if (variants.empty()) throw ConfigError("compare: need at least one variant");
        for (const auto& name : variants)
            if (!parse_variant(name))
                throw ConfigError("unknown variant '" + name +
                                  "' (valid: dasha, asha, sha, hyperband, random)");

        std::ifstream in(config_path, std::ios::binary);
        if (!in) throw ConfigError("cannot open config file: " + config_path);
        std::ostringstream buf;
        buf << in.rdbuf();
        nlohmann::json base;
        try {
            base = nlohmann::json::parse(buf.str());
        } catch (const std::exception& e) {
            throw ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
        parse_config(base.dump());  // surface config errors once, up front

        std::string out_dir_name;
        std::vector<std::vector<double>> columns;
        std::vector<double> grid;
        for (const auto& name : variants) {
            auto patched = base;
            patched["scheduler"] = name;
            auto config = parse_config(patched.dump());
            detail::apply_overrides(config, overrides);
            out_dir_name = config.output_dir;
            if (grid.empty()) grid = time_grid(config.time_budget_s);

            std::vector<std::vector<double>> aligned;
            for (const auto seed : config.seeds) {
                detail::log(1, "compare: " + name + " seed " + std::to_string(seed));
                auto objective = make_objective(config, seed);
                const auto result = run_experiment(*objective, engine_options(config, seed));
                aligned.push_back(align_to_grid(result.trajectory, grid));
            }
            columns.push_back(mean_series(aligned));
        }

        std::filesystem::create_directories(out_dir_name);
        const auto csv_path = std::filesystem::path(out_dir_name) / "compare.csv";
        std::ofstream out(csv_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + csv_path.string());
        out << "time";
        for (const auto& name : variants) out << "," << name;
        out << "\n";
        for (std::size_t g = 0; g < grid.size(); ++g) {
            out << detail::format_double(grid[g]);
            for (const auto& column : columns) out << "," << detail::format_double(column[g]);
            out << "\n";
        }
        if (!out) throw std::runtime_error("write failed: " + csv_path.string());

        std::cout << "compared";
        for (const auto& name : variants) std::cout << " " << name;
        std::cout << " -> " << csv_path.string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

inline int cmd_replay(const std::string& trajectory_path) {
    try {
        const auto trajectory = read_trajectory_jsonl(trajectory_path);
        const auto& last = trajectory.back();
        int max_level = 0;
        for (const auto& p : trajectory) max_level = std::max(max_level, p.level);
        std::cout << "valid trajectory: " << trajectory.size() << " points\n";
        std::cout << "wall_clock " << detail::format_double(trajectory.front().wall_clock)
                  << " .. " << detail::format_double(last.wall_clock) << "\n";
        std::cout << "final best_y " << detail::format_double(last.best_y) << " (level "
                  << last.level << ", config " << last.config_id << ", bracket " << last.bracket
                  << ")\n";
        std::cout << "highest level seen " << max_level << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace hypertune
