#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "hypertune/measurement.hpp"
#include "hypertune/rng.hpp"
#include "hypertune/search_space.hpp"
#include "hypertune/surrogate.hpp"

namespace hypertune {

namespace detail {

inline int order_sign(double a, double b) { return a < b ? -1 : (b < a ? 1 : 0); }

}  // namespace detail

/// Number of ordered pairs (j,k) whose predicted ordering relation (<, =, >)
/// disagrees with the observed one. A constant predictor miss-ranks every
/// pair of distinct observations.
inline std::int64_t miss_ranked_pairs(std::span<const double> preds, std::span<const double> ys) {
    if (preds.size() != ys.size())
        throw std::invalid_argument("miss_ranked_pairs: size mismatch");
    std::int64_t count = 0;
    const std::size_t n = ys.size();
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k)
            if (detail::order_sign(preds[j], preds[k]) != detail::order_sign(ys[j], ys[k]))
                ++count;
    return count;
}

/// Ordered-pair ranking loss of a surrogate against complete-resource data.
/// An unfit surrogate counts as maximally wrong: n^2.
inline std::int64_t ranking_loss(const SurrogateModel& surr, const LevelData& data) {
    const auto n = static_cast<std::int64_t>(data.n);
    if (!surr.fitted()) return n * n;
    std::vector<double> preds(data.n);
    for (std::size_t i = 0; i < data.n; ++i)
        preds[i] = surr.predict(std::span<const double>(data.X).subspan(i * data.dim, data.dim))
                       .mean;
    return miss_ranked_pairs(preds, data.y);
}

/// Out-of-fold predictions for the complete-resource data: fit on the other
/// folds, predict the held-out fold. Folds that cannot support a fit fall
/// back to the training-mean constant. Callers with fewer points than folds
/// get leave-one-out.
inline std::vector<double> out_of_fold_predictions(const LevelData& data, int folds,
                                                   std::uint64_t seed,
                                                   const ForestOptions& options = {}) {
    const std::size_t n = data.n;
    if (n < 2) throw std::invalid_argument("out_of_fold_predictions: need at least 2 points");
    const auto f = static_cast<std::size_t>(folds);
    const std::size_t actual_folds = n < f ? n : f;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(seed, 0xCFu));
    rng.shuffle(order);

    std::vector<double> preds(n, 0.0);
    for (std::size_t fold = 0; fold < actual_folds; ++fold) {
        std::vector<std::size_t> train;
        std::vector<std::size_t> held;
        for (std::size_t i = 0; i < n; ++i)
            (i % actual_folds == fold ? held : train).push_back(order[i]);
        if (held.empty()) continue;

        std::vector<double> X;
        std::vector<double> y;
        X.reserve(train.size() * data.dim);
        for (auto i : train) {
            const auto row = std::span<const double>(data.X).subspan(i * data.dim, data.dim);
            X.insert(X.end(), row.begin(), row.end());
            y.push_back(data.y[i]);
        }
        ForestSurrogate model;
        model.fit(X, train.size(), data.dim, y, mix_seed(seed, fold), options);
        if (model.fitted()) {
            for (auto i : held)
                preds[i] = model
                               .predict(std::span<const double>(data.X)
                                            .subspan(i * data.dim, data.dim))
                               .mean;
        } else {
            const double mean = y.empty()
                                    ? 0.0
                                    : std::accumulate(y.begin(), y.end(), 0.0) /
                                          static_cast<double>(y.size());
            for (auto i : held) preds[i] = mean;
        }
    }
    return preds;
}

/// Cross-validated ranking loss of the complete-resource surrogate on its own
/// training data.
inline std::int64_t ranking_loss_cv(const LevelData& data, int folds, std::uint64_t seed,
                                    const ForestOptions& options = {}) {
    const auto n = static_cast<std::int64_t>(data.n);
    if (n < 2) return n * n;
    const auto preds = out_of_fold_predictions(data, folds, seed, options);
    return miss_ranked_pairs(preds, data.y);
}

/// Per-level predictions over the complete-resource data, used to resample
/// ranking losses. `active` marks levels holding at least one measurement;
/// an active level with empty `preds` competes with maximal loss.
struct LevelPredictions {
    bool active = false;
    std::vector<double> preds;
};

/// Resamples the complete-resource index set S times; each sample awards a
/// win to the level with the smallest restricted ranking loss (ties split
/// uniformly). Returns the win frequencies.
inline std::vector<double> estimate_theta_from_predictions(
    const std::vector<LevelPredictions>& levels, std::span<const double> ys, int S,
    std::uint64_t seed) {
    const std::size_t K = levels.size();
    if (K == 0) throw std::invalid_argument("estimate_theta: no levels");
    if (S < 1) throw std::invalid_argument("estimate_theta: S must be positive");
    const std::size_t n = ys.size();

    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < K; ++i)
        if (levels[i].active) active.push_back(i);

    std::vector<double> theta(K, 0.0);
    if (active.empty()) {
        std::fill(theta.begin(), theta.end(), 1.0 / static_cast<double>(K));
        return theta;
    }
    if (n < 2) {
        for (auto i : active) theta[i] = 1.0 / static_cast<double>(active.size());
        return theta;
    }
    for (auto i : active)
        if (!levels[i].preds.empty() && levels[i].preds.size() != n)
            throw std::invalid_argument("estimate_theta: prediction length mismatch");

    Rng rng(mix_seed(seed, 0xE92u));
    std::vector<std::size_t> idx(n);
    std::vector<std::size_t> winners;
    std::vector<std::int64_t> wins(K, 0);
    const std::int64_t max_loss = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n);

    for (int s = 0; s < S; ++s) {
        for (auto& v : idx) v = rng.uniform_int(n);
        std::int64_t best = std::numeric_limits<std::int64_t>::max();
        winners.clear();
        for (auto i : active) {
            std::int64_t loss = max_loss;
            if (!levels[i].preds.empty()) {
                const auto& p = levels[i].preds;
                loss = 0;
                for (std::size_t a = 0; a < n; ++a)
                    for (std::size_t b = 0; b < n; ++b)
                        if (detail::order_sign(p[idx[a]], p[idx[b]]) !=
                            detail::order_sign(ys[idx[a]], ys[idx[b]]))
                            ++loss;
            }
            if (loss < best) {
                best = loss;
                winners.assign(1, i);
            } else if (loss == best) {
                winners.push_back(i);
            }
        }
        ++wins[winners[rng.uniform_int(winners.size())]];
    }
    for (std::size_t i = 0; i < K; ++i)
        theta[i] = static_cast<double>(wins[i]) / static_cast<double>(S);
    return theta;
}

/// Fits each level's surrogate and scores it on the complete-resource data
/// (out-of-fold for the top level), then bootstrap-resamples wins. With fewer
/// than two complete measurements there is no ranking evidence and theta is
/// uniform over the non-empty levels.
inline std::vector<double> estimate_theta(const SearchSpace& space, const MeasurementStore& store,
                                          const TunerParams& tuner, int S, std::uint64_t seed,
                                          const ForestOptions& options = {}) {
    const int K = tuner.levels();
    const auto complete = encode_level(space, store, K);

    std::vector<LevelPredictions> levels(static_cast<std::size_t>(K));
    for (int level = 1; level <= K; ++level) {
        auto& entry = levels[static_cast<std::size_t>(level - 1)];
        const auto data = encode_level(space, store, level);
        entry.active = data.n > 0;
        if (!entry.active || complete.n < 2) continue;
        if (level == K) {
            entry.preds = out_of_fold_predictions(complete, 5, seed, options);
        } else {
            ForestSurrogate model;
            model.fit(data.X, data.n, data.dim, data.y, mix_seed(seed, 0xF17u), options);
            if (!model.fitted()) continue;
            entry.preds.resize(complete.n);
            for (std::size_t i = 0; i < complete.n; ++i)
                entry.preds[i] =
                    model.predict(std::span<const double>(complete.X)
                                      .subspan(i * complete.dim, complete.dim))
                        .mean;
        }
    }
    return estimate_theta_from_predictions(levels, complete.y, S, seed);
}

struct BracketWeights {
    std::vector<double> theta;
    std::vector<double> cost;  // c_i = 1 / r_i
    std::vector<double> w;     // normalize(c ∘ theta)
};

/// Combines precision weights with inverse training cost. A zero product
/// vector yields uniform weights over the levels flagged non-empty (all
/// levels when no flags are given).
inline BracketWeights bracket_weights(const std::vector<double>& theta, const TunerParams& tuner,
                                      const std::vector<bool>* nonempty = nullptr) {
    const auto K = static_cast<std::size_t>(tuner.levels());
    if (theta.size() != K)
        throw std::invalid_argument("bracket_weights: theta length must equal level count");
    if (nonempty && nonempty->size() != K)
        throw std::invalid_argument("bracket_weights: mask length must equal level count");

    BracketWeights out;
    out.theta = theta;
    out.cost.resize(K);
    out.w.assign(K, 0.0);
    for (std::size_t i = 0; i < K; ++i)
        out.cost[i] = 1.0 / static_cast<double>(tuner.resource_units(static_cast<int>(i) + 1));

    double total = 0.0;
    for (std::size_t i = 0; i < K; ++i) {
        out.w[i] = out.cost[i] * theta[i];
        total += out.w[i];
    }
    if (total > 0.0) {
        for (auto& v : out.w) v /= total;
        return out;
    }

    std::size_t eligible = 0;
    for (std::size_t i = 0; i < K; ++i)
        if (!nonempty || (*nonempty)[i]) ++eligible;
    if (eligible == 0) eligible = K;
    for (std::size_t i = 0; i < K; ++i)
        out.w[i] = (!nonempty || (*nonempty)[i] || eligible == K)
                       ? 1.0 / static_cast<double>(eligible)
                       : 0.0;
    return out;
}

struct AllocatorState {
    int samples = 100;            // S in the resampling estimate
    int round_robin_multiplier = 3;
    std::vector<int> starts;      // bracket starts handed out, per bracket

    explicit AllocatorState(int K = 0) : starts(static_cast<std::size_t>(K), 0) {}

    int total_starts() const {
        int total = 0;
        for (int s : starts) total += s;
        return total;
    }
};

/// Round-robin over brackets for the first multiplier*K starts, then
/// categorical sampling by w. Returns a 1-based bracket index.
inline int choose_bracket(AllocatorState& state, const BracketWeights& weights, Rng& rng) {
    const auto K = weights.w.size();
    if (K == 0) throw std::invalid_argument("choose_bracket: empty weights");
    if (state.starts.size() != K)
        throw std::invalid_argument("choose_bracket: state sized for different level count");

    const int total = state.total_starts();
    std::size_t bracket;
    if (total < state.round_robin_multiplier * static_cast<int>(K)) {
        bracket = static_cast<std::size_t>(total) % K;
    } else {
        bracket = rng.categorical(weights.w);
    }
    ++state.starts[bracket];
    return static_cast<int>(bracket) + 1;
}

}  // namespace hypertune
