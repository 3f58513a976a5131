#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "hypertune/measurement.hpp"
#include "hypertune/objectives.hpp"
#include "hypertune/search_space.hpp"

namespace hypertune {

/// Parses the canonical "name=value,name=value" rendering back into a
/// Configuration. Every parameter must appear exactly once.
inline Configuration parse_config_key(const SearchSpace& space, const std::string& key) {
    std::vector<bool> seen(space.dimension(), false);
    Configuration config;
    config.values.resize(space.dimension());

    std::size_t pos = 0;
    while (pos <= key.size()) {
        const auto comma = key.find(',', pos);
        const auto token = key.substr(pos, comma == std::string::npos ? std::string::npos
                                                                      : comma - pos);
        pos = comma == std::string::npos ? key.size() + 1 : comma + 1;
        if (token.empty()) throw SpaceError("empty assignment in config key");
        const auto eq = token.find('=');
        if (eq == std::string::npos)
            throw SpaceError("expected name=value, got '" + token + "'");
        const auto name = token.substr(0, eq);
        const auto value = token.substr(eq + 1);
        const auto idx = space.index_of(name);
        if (seen[idx]) throw SpaceError("param '" + name + "' assigned twice");
        seen[idx] = true;

        const auto& spec = space.param(idx);
        switch (spec.kind) {
        case ParamKind::Continuous: {
            double v = 0.0;
            const auto* begin = value.data();
            const auto* end = value.data() + value.size();
            const auto res = std::from_chars(begin, end, v);
            if (res.ec != std::errc{} || res.ptr != end)
                throw SpaceError("param '" + name + "': bad real value '" + value + "'");
            config.values[idx] = v;
            break;
        }
        case ParamKind::Integer: {
            std::int64_t v = 0;
            const auto* begin = value.data();
            const auto* end = value.data() + value.size();
            const auto res = std::from_chars(begin, end, v);
            if (res.ec != std::errc{} || res.ptr != end)
                throw SpaceError("param '" + name + "': bad integer value '" + value + "'");
            config.values[idx] = v;
            break;
        }
        case ParamKind::Categorical: {
            std::optional<std::size_t> choice;
            for (std::size_t c = 0; c < spec.choices.size(); ++c)
                if (spec.choices[c] == value) { choice = c; break; }
            if (!choice)
                throw SpaceError("param '" + name + "': unknown choice '" + value + "'");
            config.values[idx] = static_cast<std::int64_t>(*choice);
            break;
        }
        }
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i]) throw SpaceError("param '" + space.param(i).name + "' missing from key");
    space.check(config);
    return config;
}

class TabularParseError : public std::runtime_error {
public:
    TabularParseError(const std::string& path, int line, const std::string& what)
        : std::runtime_error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

struct TabularEntry {
    double y = 0.0;
    double cost = 1.0;
};

/// Offline evaluation table: (config key, level) -> (y, cost). Missing
/// cells are legal and surface as failed evaluations.
class TabularBenchmark {
public:
    TabularBenchmark(SearchSpace space, TunerParams tuner, bool resumable)
        : space_(std::move(space)), tuner_(tuner), resumable_(resumable) {}

    const SearchSpace& space() const { return space_; }
    const TunerParams& tuner() const { return tuner_; }
    bool resumable() const { return resumable_; }
    std::size_t rows() const { return rows_; }

    void insert(const std::string& key, int level, TabularEntry entry) {
        auto& cells = table_[key];
        if (cells.empty()) cells.resize(static_cast<std::size_t>(tuner_.levels()));
        auto& cell = cells.at(static_cast<std::size_t>(level - 1));
        if (cell) throw std::invalid_argument("duplicate (config, level) row");
        cell = entry;
        ++rows_;
    }

    std::optional<TabularEntry> lookup(const std::string& key, int level) const {
        const auto it = table_.find(key);
        if (it == table_.end()) return std::nullopt;
        return it->second.at(static_cast<std::size_t>(level - 1));
    }

private:
    SearchSpace space_;
    TunerParams tuner_;
    bool resumable_ = false;
    std::size_t rows_ = 0;
    std::unordered_map<std::string, std::vector<std::optional<TabularEntry>>> table_;
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream in(line);
    std::vector<std::string> out;
    std::string token;
    while (in >> token) out.push_back(token);
    return out;
}

}  // namespace detail

/// Loads the line-oriented tabular format:
///   hypertune-tabular v1
///   param <name> continuous <lower> <upper> [log]
///   param <name> integer <lower> <upper>
///   param <name> categorical <choice>...
///   eta <eta>
///   max_resource <R>
///   resumable <true|false>        (optional)
///   <config-key> <level> <y> <cost>
/// Blank lines and lines starting with # are ignored.
inline TabularBenchmark load_tabular(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open tabular file: " + path);

    std::vector<ParamSpec> params;
    std::optional<int> eta;
    std::optional<int> max_resource;
    bool resumable = false;
    std::optional<TabularBenchmark> bench;

    std::string line;
    int line_no = 0;
    bool saw_magic = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto tokens = detail::split_ws(line);
        if (tokens.empty() || tokens[0][0] == '#') continue;

        if (!saw_magic) {
            if (tokens.size() != 2 || tokens[0] != "hypertune-tabular" || tokens[1] != "v1")
                throw TabularParseError(path, line_no, "expected header 'hypertune-tabular v1'");
            saw_magic = true;
            continue;
        }

        if (tokens[0] == "param") {
            if (bench) throw TabularParseError(path, line_no, "param after first data row");
            try {
                if (tokens.size() >= 3 && tokens[2] == "continuous") {
                    if (tokens.size() < 5 || tokens.size() > 6 ||
                        (tokens.size() == 6 && tokens[5] != "log"))
                        throw std::invalid_argument("usage: param <name> continuous <lo> <hi> [log]");
                    params.push_back(ParamSpec::continuous(tokens[1], std::stod(tokens[3]),
                                                           std::stod(tokens[4]),
                                                           tokens.size() == 6));
                } else if (tokens.size() == 5 && tokens[2] == "integer") {
                    params.push_back(ParamSpec::integer(tokens[1], std::stoll(tokens[3]),
                                                        std::stoll(tokens[4])));
                } else if (tokens.size() >= 4 && tokens[2] == "categorical") {
                    params.push_back(ParamSpec::categorical(
                        tokens[1], {tokens.begin() + 3, tokens.end()}));
                } else {
                    throw std::invalid_argument("unknown param declaration");
                }
            } catch (const std::exception& e) {
                throw TabularParseError(path, line_no, e.what());
            }
            continue;
        }
        if (tokens[0] == "eta" || tokens[0] == "max_resource") {
            if (tokens.size() != 2)
                throw TabularParseError(path, line_no, "usage: " + tokens[0] + " <int>");
            try {
                (tokens[0] == "eta" ? eta : max_resource) = std::stoi(tokens[1]);
            } catch (const std::exception&) {
                throw TabularParseError(path, line_no, "bad integer '" + tokens[1] + "'");
            }
            continue;
        }
        if (tokens[0] == "resumable") {
            if (tokens.size() != 2 || (tokens[1] != "true" && tokens[1] != "false"))
                throw TabularParseError(path, line_no, "usage: resumable <true|false>");
            resumable = tokens[1] == "true";
            continue;
        }

        // data row
        if (!bench) {
            if (params.empty())
                throw TabularParseError(path, line_no, "data row before any param declaration");
            if (!eta || !max_resource)
                throw TabularParseError(path, line_no,
                                        "eta and max_resource must precede data rows");
            try {
                bench.emplace(SearchSpace(params), TunerParams(*eta, *max_resource), resumable);
            } catch (const std::exception& e) {
                throw TabularParseError(path, line_no, e.what());
            }
        }
        if (tokens.size() != 4)
            throw TabularParseError(path, line_no,
                                    "expected '<config-key> <level> <y> <cost>'");
        try {
            const auto config = parse_config_key(bench->space(), tokens[0]);
            const int level = std::stoi(tokens[1]);
            if (level < 1 || level > bench->tuner().levels())
                throw std::invalid_argument("level " + tokens[1] + " outside 1.." +
                                            std::to_string(bench->tuner().levels()));
            const double y = std::stod(tokens[2]);
            const double cost = std::stod(tokens[3]);
            if (!(cost > 0.0)) throw std::invalid_argument("cost must be > 0");
            bench->insert(config_key(bench->space(), config), level, TabularEntry{y, cost});
        } catch (const TabularParseError&) {
            throw;
        } catch (const std::exception& e) {
            throw TabularParseError(path, line_no, e.what());
        }
    }
    if (!saw_magic) throw TabularParseError(path, line_no, "empty file");
    if (!bench) throw TabularParseError(path, line_no, "no data rows");
    return std::move(*bench);
}

/// Objective view over a loaded table; cells absent from the table come back
/// as failed evaluations.
class TabularObjective final : public Objective {
public:
    explicit TabularObjective(TabularBenchmark bench) : bench_(std::move(bench)) {}

    const SearchSpace& space() const override { return bench_.space(); }
    const TunerParams& tuner() const override { return bench_.tuner(); }
    bool resumable() const override { return bench_.resumable(); }

    double cost(const Configuration& config, int level) const override {
        const auto entry = bench_.lookup(config_key(bench_.space(), config), level);
        return entry ? entry->cost : 1.0;
    }

    EvalResult evaluate(const Configuration& config, int level) override {
        const auto entry = bench_.lookup(config_key(bench_.space(), config), level);
        if (!entry) return {0.0, 1.0, true};
        return {entry->y, entry->cost, false};
    }

private:
    TabularBenchmark bench_;
};

}  // namespace hypertune
