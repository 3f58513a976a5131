#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hypertune/search_space.hpp"

namespace hypertune {

/// Resource ladder shared by the whole run: levels i = 1..K evaluate with
/// r_i = eta^(i-1) units, level K being the complete evaluation.
struct TunerParams {
    int eta = 3;
    int max_resource = 27;

    TunerParams() = default;
    TunerParams(int eta_, int max_resource_) : eta(eta_), max_resource(max_resource_) {
        if (eta < 2) throw std::invalid_argument("eta must be >= 2");
        if (max_resource < 1) throw std::invalid_argument("max_resource must be >= 1");
    }

    int levels() const {
        int k = 1;
        std::int64_t r = 1;
        while (r * eta <= max_resource) {
            r *= eta;
            ++k;
        }
        return k;
    }

    /// r_i in resource units, level in 1..K.
    std::int64_t resource_units(int level) const {
        std::int64_t r = 1;
        for (int i = 1; i < level; ++i) r *= eta;
        return r;
    }

    bool operator==(const TunerParams&) const = default;
};

/// One completed evaluation of a configuration at a resource level.
struct Measurement {
    Configuration config;
    double y = 0.0;  // lower is better
    int level = 1;
    int bracket_id = 1;
    double sim_time_start = 0.0;
    double sim_time_end = 0.0;
    int worker_id = 0;
    bool failed = false;
};

/// Fidelity-grouped observations D_1..D_K plus per-(config, level)
/// promotion flags. Mutated only by the experiment event loop.
class MeasurementStore {
public:
    explicit MeasurementStore(const SearchSpace& space, const TunerParams& tuner)
        : space_(&space), levels_(tuner.levels()), groups_(static_cast<std::size_t>(levels_)) {}

    int levels() const { return levels_; }
    const SearchSpace& space() const { return *space_; }

    const std::vector<Measurement>& group(int level) const {
        check_level(level);
        return groups_[static_cast<std::size_t>(level - 1)];
    }

    std::size_t count(int level) const { return group(level).size(); }

    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& g : groups_) n += g.size();
        return n;
    }

    /// Appends m to D_{m.level}. The measurement's y is replaced by the
    /// failure penalty (worst finite y so far + 1) when m.failed is set.
    void record(Measurement m) {
        check_level(m.level);
        if (m.sim_time_end < m.sim_time_start)
            throw std::invalid_argument("measurement ends before it starts");
        if (m.failed) {
            m.y = failure_penalty();
        } else if (!std::isfinite(m.y)) {
            m.failed = true;
            m.y = failure_penalty();
        }
        groups_[static_cast<std::size_t>(m.level - 1)].push_back(std::move(m));
    }

    bool is_promoted(const std::string& key, int level) const {
        return promoted_.count(flag_key(key, level)) > 0;
    }

    /// Flags the config as promoted from `level`. A flag may be set once.
    void mark_promoted(const std::string& key, int level) {
        check_level(level);
        if (!promoted_.insert(flag_key(key, level)).second)
            throw std::logic_error("config '" + key + "' already promoted from level " + std::to_string(level));
    }

    /// Configs of D_k ranked by y ascending, restricted to the top
    /// floor(|D_k|/eta) ranks and excluding configs already promoted from
    /// level k. Ties break by earlier completion, then insertion order.
    std::vector<Configuration> top_candidates(int k, int eta) const {
        check_level(k);
        if (k >= levels_) throw std::invalid_argument("top_candidates: level K has no next level");
        const auto& d = groups_[static_cast<std::size_t>(k - 1)];
        const std::size_t limit = d.size() / static_cast<std::size_t>(eta);
        if (limit == 0) return {};

        std::vector<std::size_t> order(d.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (d[a].y != d[b].y) return d[a].y < d[b].y;
            if (d[a].sim_time_end != d[b].sim_time_end) return d[a].sim_time_end < d[b].sim_time_end;
            return a < b;
        });

        std::vector<Configuration> out;
        for (std::size_t rank = 0; rank < limit; ++rank) {
            const auto& m = d[order[rank]];
            if (!is_promoted(config_key(*space_, m.config), k)) out.push_back(m.config);
        }
        return out;
    }

    /// Worst finite y across all groups + 1; the ordering sentinel recorded
    /// for failed evaluations.
    double failure_penalty() const {
        double worst = 0.0;
        bool any = false;
        for (const auto& g : groups_) {
            for (const auto& m : g) {
                if (std::isfinite(m.y) && (!any || m.y > worst)) {
                    worst = m.y;
                    any = true;
                }
            }
        }
        return any ? worst + 1.0 : 1.0;
    }

private:
    static std::string flag_key(const std::string& key, int level) {
        return std::to_string(level) + '\x1f' + key;
    }

    void check_level(int level) const {
        if (level < 1 || level > levels_)
            throw std::invalid_argument("level " + std::to_string(level) + " outside 1.." + std::to_string(levels_));
    }

    const SearchSpace* space_;
    int levels_;
    std::vector<std::vector<Measurement>> groups_;
    std::unordered_set<std::string> promoted_;
};

}  // namespace hypertune
