#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "hypertune/measurement.hpp"
#include "hypertune/search_space.hpp"

namespace hypertune {

struct Rung {
    int n = 0;     // configurations entering the rung
    double r = 0;  // resource units per evaluation

    bool operator==(const Rung&) const = default;
};

struct BracketSchedule {
    int index = 1;  // 1 = most aggressive early stopping
    std::vector<Rung> rungs;
};

/// Bracket table for synchronous Hyperband: bracket s (s = s_max..0) starts
/// with n_1 = ceil((B/R) * eta^s / (s+1)) configs at r_1 = R * eta^(-s),
/// thinning by eta per rung until r = R.
inline std::vector<BracketSchedule> hyperband_schedule(int R, int eta) {
    if (R < 1) throw std::invalid_argument("hyperband_schedule: R must be >= 1");
    if (eta < 2) throw std::invalid_argument("hyperband_schedule: eta must be >= 2");

    int s_max = 0;
    std::int64_t power = 1;
    while (power * eta <= R) {
        power *= eta;
        ++s_max;
    }
    const double budget_ratio = static_cast<double>(s_max + 1);  // B / R

    std::vector<BracketSchedule> schedules;
    for (int s = s_max; s >= 0; --s) {
        BracketSchedule bracket;
        bracket.index = s_max - s + 1;
        double eta_pow_s = 1.0;
        for (int i = 0; i < s; ++i) eta_pow_s *= eta;
        int n = static_cast<int>(
            std::ceil(budget_ratio * eta_pow_s / static_cast<double>(s + 1) - 1e-12));
        for (int i = 0; i <= s; ++i) {
            double denom = 1.0;
            for (int j = 0; j < s - i; ++j) denom *= eta;
            bracket.rungs.push_back(Rung{n, static_cast<double>(R) / denom});
            n = n / eta;
        }
        schedules.push_back(std::move(bracket));
    }
    return schedules;
}

/// One asynchronous SHA instance: bracket b evaluates fresh configs at
/// start_level and promotes through the shared rung data.
struct RungLadder {
    int bracket_id = 1;
    int start_level = 1;
};

enum class JobKind { Fresh, Promotion };

struct Job {
    Configuration config;
    int level = 1;
    int bracket_id = 1;
    JobKind kind = JobKind::Fresh;
};

namespace detail {

inline int bracket_of(const MeasurementStore& store, const std::string& key, int level) {
    for (const auto& m : store.group(level))
        if (config_key(store.space(), m.config) == key) return m.bracket_id;
    return 1;
}

}  // namespace detail

/// Scans levels K-1 down to lowest_level for a promotable configuration:
/// the best unpromoted config in the top 1/eta of D_k. With `delayed` set,
/// a level is considered only while |D_k| / (|D_{k+1}| + 1) >= eta. On
/// success the promotion flag is set and a level-(k+1) job returned.
inline std::optional<Job> find_promotion(MeasurementStore& store, const TunerParams& tuner,
                                         int lowest_level, bool delayed) {
    const int K = tuner.levels();
    for (int k = K - 1; k >= lowest_level; --k) {
        if (delayed) {
            const double ratio = static_cast<double>(store.count(k)) /
                                 (static_cast<double>(store.count(k + 1)) + 1.0);
            if (ratio < static_cast<double>(tuner.eta)) continue;
        }
        const auto candidates = store.top_candidates(k, tuner.eta);
        if (candidates.empty()) continue;
        const auto key = config_key(store.space(), candidates.front());
        store.mark_promoted(key, k);
        Job job;
        job.config = candidates.front();
        job.level = k + 1;
        job.bracket_id = detail::bracket_of(store, key, k);
        job.kind = JobKind::Promotion;
        return job;
    }
    return std::nullopt;
}

using SamplerFn = std::function<Configuration()>;

/// Delayed ASHA job selection: promote when a rung is both deep enough
/// relative to the next rung and holds an unpromoted top-1/eta config;
/// otherwise start a fresh config at the ladder's first rung.
inline Job dasha_get_job(MeasurementStore& store, const TunerParams& tuner,
                         const RungLadder& ladder, const SamplerFn& sampler) {
    if (auto job = find_promotion(store, tuner, ladder.start_level, true)) return *job;
    Job job;
    job.config = sampler();
    job.level = ladder.start_level;
    job.bracket_id = ladder.bracket_id;
    job.kind = JobKind::Fresh;
    return job;
}

/// ASHA job selection: as dasha_get_job without the rung-depth delay.
inline Job asha_get_job(MeasurementStore& store, const TunerParams& tuner,
                        const RungLadder& ladder, const SamplerFn& sampler) {
    if (auto job = find_promotion(store, tuner, ladder.start_level, false)) return *job;
    Job job;
    job.config = sampler();
    job.level = ladder.start_level;
    job.bracket_id = ladder.bracket_id;
    job.kind = JobKind::Fresh;
    return job;
}

}  // namespace hypertune
