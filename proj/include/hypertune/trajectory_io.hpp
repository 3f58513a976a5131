#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hypertune/engine.hpp"
#include "hypertune/search_space.hpp"

namespace hypertune {

class TrajectoryError : public std::runtime_error {
public:
    TrajectoryError(const std::string& path, int line, const std::string& what)
        : std::runtime_error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

inline std::string trajectory_jsonl_line(const TrajectoryPoint& p) {
    std::string out;
    out += "{\"wall_clock\":";
    out += detail::format_double(p.wall_clock);
    out += ",\"best_y\":";
    out += detail::format_double(p.best_y);
    out += ",\"level\":";
    out += std::to_string(p.level);
    out += ",\"config_id\":";
    out += std::to_string(p.config_id);
    out += ",\"bracket\":";
    out += std::to_string(p.bracket);
    out += "}";
    return out;
}

inline void write_trajectory_jsonl(const std::string& path,
                                   const std::vector<TrajectoryPoint>& trajectory) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& p : trajectory) out << trajectory_jsonl_line(p) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline void write_trajectory_csv(const std::string& path,
                                 const std::vector<TrajectoryPoint>& trajectory) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "wall_clock,best_y,level,config_id,bracket\n";
    for (const auto& p : trajectory) {
        out << detail::format_double(p.wall_clock) << "," << detail::format_double(p.best_y)
            << "," << p.level << "," << p.config_id << "," << p.bracket << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

/// Reads and validates a JSONL trajectory: per-line schema, non-decreasing
/// wall clock, non-increasing best_y, nothing after the last record. Throws
/// TrajectoryError with the offending line number.
inline std::vector<TrajectoryPoint> read_trajectory_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);

    std::vector<TrajectoryPoint> points;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw TrajectoryError(path, line_no, e.what());
        }
        if (!j.is_object()) throw TrajectoryError(path, line_no, "expected a JSON object");
        for (const auto& [key, value] : j.items()) {
            (void)value;
            if (key != "wall_clock" && key != "best_y" && key != "level" &&
                key != "config_id" && key != "bracket")
                throw TrajectoryError(path, line_no, "unknown key '" + key + "'");
        }
        for (const char* key : {"wall_clock", "best_y", "level", "config_id", "bracket"})
            if (!j.contains(key))
                throw TrajectoryError(path, line_no, std::string("missing key '") + key + "'");
        if (!j["wall_clock"].is_number() || !j["best_y"].is_number())
            throw TrajectoryError(path, line_no, "wall_clock and best_y must be numbers");
        for (const char* key : {"level", "config_id", "bracket"})
            if (!j[key].is_number_integer())
                throw TrajectoryError(path, line_no, std::string(key) + " must be an integer");

        TrajectoryPoint p;
        p.wall_clock = j["wall_clock"].get<double>();
        p.best_y = j["best_y"].get<double>();
        p.level = j["level"].get<int>();
        p.config_id = j["config_id"].get<int>();
        p.bracket = j["bracket"].get<int>();

        if (!points.empty()) {
            if (p.wall_clock < points.back().wall_clock)
                throw TrajectoryError(path, line_no, "wall_clock decreases");
            if (p.best_y > points.back().best_y)
                throw TrajectoryError(path, line_no, "best_y increases");
        }
        points.push_back(p);
    }
    if (points.empty()) throw TrajectoryError(path, line_no, "no trajectory records");
    return points;
}

}  // namespace hypertune
