#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "hypertune/measurement.hpp"
#include "hypertune/random_forest.hpp"
#include "hypertune/rng.hpp"
#include "hypertune/search_space.hpp"

namespace hypertune {

struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
};

/// Thrown when a prediction is requested but no fitted base carries weight.
class ColdStartError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SurrogateModel {
public:
    virtual ~SurrogateModel() = default;
    virtual bool fitted() const = 0;
    virtual Prediction predict(std::span<const double> x) const = 0;
};

namespace detail {

inline std::uint64_t data_fingerprint(std::span<const double> X, std::span<const double> y,
                                      std::uint64_t seed) {
    std::uint64_t h = 0xcbf29ce484222325ull ^ seed;
    auto mix = [&h](double v) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        std::memcpy(&bits, &v, sizeof(bits));
        h = splitmix64(h ^ bits);
    };
    for (double v : X) mix(v);
    for (double v : y) mix(v);
    return h;
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of empty set");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return v[n / 2 - 1] + (v[n / 2] - v[n / 2 - 1]) / 2.0;
}

inline double normal_pdf(double z) {
    static const double inv_sqrt_2pi = 0.3989422804014326779;
    return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace detail

/// Random-forest regressor behind the SurrogateModel interface. Degenerate
/// training data (fewer than two points, or a constant target) leaves the
/// model unfit instead of raising.
class ForestSurrogate final : public SurrogateModel {
public:
    ForestSurrogate() = default;

    void fit(std::span<const double> X, std::size_t n, std::size_t dim,
             std::span<const double> y, std::uint64_t seed, const ForestOptions& options = {}) {
        fitted_ = false;
        if (n < 2 || y.size() != n || X.size() != n * dim) return;
        bool distinct = false;
        for (std::size_t i = 1; i < n; ++i)
            if (y[i] != y[0]) { distinct = true; break; }
        if (!distinct) return;
        forest_.fit(X, n, dim, y, seed, options);
        fingerprint_ = detail::data_fingerprint(X, y, seed);
        fitted_ = true;
    }

    bool fitted() const override { return fitted_; }
    std::uint64_t fingerprint() const { return fingerprint_; }

    Prediction predict(std::span<const double> x) const override {
        if (!fitted_) throw std::logic_error("ForestSurrogate::predict on unfit model");
        auto [mean, var] = forest_.predict(x);
        return {mean, var};
    }

private:
    RegressionForest forest_;
    bool fitted_ = false;
    std::uint64_t fingerprint_ = 0;
};

/// Fixed-output model for tests and for degenerate fallbacks.
class ConstantSurrogate final : public SurrogateModel {
public:
    ConstantSurrogate() = default;
    explicit ConstantSurrogate(Prediction p) : pred_(p), fitted_(true) {}
    bool fitted() const override { return fitted_; }
    Prediction predict(std::span<const double>) const override {
        if (!fitted_) throw std::logic_error("ConstantSurrogate::predict on unfit model");
        return pred_;
    }

private:
    Prediction pred_{};
    bool fitted_ = false;
};

/// Encoded design matrix of the non-failed measurements at one level.
struct LevelData {
    std::vector<double> X;  // row-major, n x dim
    std::vector<double> y;
    std::size_t n = 0;
    std::size_t dim = 0;
};

inline LevelData encode_level(const SearchSpace& space, const MeasurementStore& store, int level) {
    LevelData data;
    data.dim = space.encoded_dimension();
    for (const auto& m : store.group(level)) {
        if (m.failed) continue;
        const auto row = encode(space, m.config);
        data.X.insert(data.X.end(), row.begin(), row.end());
        data.y.push_back(m.y);
        ++data.n;
    }
    return data;
}

inline std::shared_ptr<SurrogateModel> fit_base(const SearchSpace& space,
                                                const MeasurementStore& store, int level,
                                                std::uint64_t seed,
                                                const ForestOptions& options = {}) {
    const auto data = encode_level(space, store, level);
    auto model = std::make_shared<ForestSurrogate>();
    model->fit(data.X, data.n, data.dim, data.y, seed, options);
    return model;
}

/// Weighted combination of the per-level base surrogates. Weights attached to
/// unfit bases are dropped and the remainder renormalized.
class EnsembleSurrogate {
public:
    EnsembleSurrogate() = default;

    EnsembleSurrogate(std::vector<std::shared_ptr<SurrogateModel>> bases,
                      std::vector<double> theta)
        : bases_(std::move(bases)), raw_theta_(std::move(theta)), theta_(raw_theta_) {
        if (bases_.size() != theta_.size())
            throw std::invalid_argument("EnsembleSurrogate: bases/theta size mismatch");
        for (double t : theta_)
            if (!(t >= 0.0) || !std::isfinite(t))
                throw std::invalid_argument("EnsembleSurrogate: theta must be non-negative");
        double total = 0.0;
        for (std::size_t i = 0; i < bases_.size(); ++i) {
            if (!bases_[i] || !bases_[i]->fitted()) theta_[i] = 0.0;
            total += theta_[i];
        }
        if (total > 0.0)
            for (auto& t : theta_) t /= total;
    }

    std::size_t size() const { return bases_.size(); }
    /// Effective weights: zeroed for unfit bases, renormalized to sum 1.
    const std::vector<double>& theta() const { return theta_; }
    /// Weights as handed in, before the unfit-base adjustment.
    const std::vector<double>& raw_theta() const { return raw_theta_; }
    const std::shared_ptr<SurrogateModel>& base(std::size_t i) const { return bases_.at(i); }

    bool usable() const {
        for (std::size_t i = 0; i < bases_.size(); ++i)
            if (theta_[i] > 0.0 && bases_[i] && bases_[i]->fitted()) return true;
        return false;
    }

    /// Replaces one base and renormalizes; used when level K is refit with
    /// imputed pending points.
    EnsembleSurrogate with_base(std::size_t i, std::shared_ptr<SurrogateModel> model) const {
        auto bases = bases_;
        auto theta = raw_theta_;
        bases.at(i) = std::move(model);
        return EnsembleSurrogate(std::move(bases), std::move(theta));
    }

    Prediction predict(std::span<const double> x) const {
        if (!usable()) throw ColdStartError("ensemble has no fitted weighted base");
        double mean = 0.0;
        double var = 0.0;
        for (std::size_t i = 0; i < bases_.size(); ++i) {
            if (theta_[i] == 0.0) continue;
            const auto p = bases_[i]->predict(x);
            mean += theta_[i] * p.mean;
            var += theta_[i] * theta_[i] * p.variance;
        }
        return {mean, var};
    }

private:
    std::vector<std::shared_ptr<SurrogateModel>> bases_;
    std::vector<double> raw_theta_;
    std::vector<double> theta_;
};

inline Prediction predict_ensemble(const EnsembleSurrogate& ens, std::span<const double> x) {
    return ens.predict(x);
}

inline Prediction predict_ensemble(const EnsembleSurrogate& ens, const SearchSpace& space,
                                   const Configuration& config) {
    const auto x = encode(space, config);
    return ens.predict(x);
}

/// Expected improvement for minimization.
inline double expected_improvement(const Prediction& pred, double best_y) {
    if (!(pred.variance >= 0.0) || !std::isfinite(pred.mean) || !std::isfinite(pred.variance))
        throw std::invalid_argument("expected_improvement: invalid prediction");
    const double sigma = std::sqrt(pred.variance);
    const double diff = best_y - pred.mean;
    if (sigma == 0.0) return std::max(diff, 0.0);
    const double z = diff / sigma;
    return std::max(0.0, diff * detail::normal_cdf(z) + sigma * detail::normal_pdf(z));
}

/// Configurations currently out on workers. Counted per distinct config so a
/// config that is in flight twice stays pending until its last job finishes.
class PendingSet {
public:
    void add(const SearchSpace& space, const Configuration& config) {
        const auto key = config_key(space, config);
        auto it = entries_.find(key);
        if (it == entries_.end()) {
            entries_.emplace(key, Entry{config, 1});
            order_.push_back(key);
        } else {
            ++it->second.count;
        }
    }

    void remove(const SearchSpace& space, const Configuration& config) {
        const auto key = config_key(space, config);
        auto it = entries_.find(key);
        if (it == entries_.end())
            throw std::logic_error("PendingSet::remove: config not pending");
        if (--it->second.count == 0) {
            entries_.erase(it);
            order_.erase(std::find(order_.begin(), order_.end(), key));
        }
    }

    bool contains_key(const std::string& key) const { return entries_.count(key) > 0; }
    bool contains(const SearchSpace& space, const Configuration& config) const {
        return contains_key(config_key(space, config));
    }
    std::size_t size() const { return order_.size(); }
    bool empty() const { return order_.empty(); }

    /// Distinct pending configs in insertion order.
    std::vector<Configuration> configs() const {
        std::vector<Configuration> out;
        out.reserve(order_.size());
        for (const auto& key : order_) out.push_back(entries_.at(key).config);
        return out;
    }

private:
    struct Entry {
        Configuration config;
        int count = 0;
    };
    std::unordered_map<std::string, Entry> entries_;
    std::vector<std::string> order_;
};

struct SuggestOptions {
    int n_random = 2000;
    int n_chains = 10;
    int chain_length = 20;
    bool impute_pending = true;
    ForestOptions forest{};

    bool operator==(const SuggestOptions&) const = default;
};

namespace detail {

inline Configuration perturb(const SearchSpace& space, const Configuration& base, Rng& rng) {
    Configuration out = base;
    for (std::size_t i = 0; i < space.dimension(); ++i) {
        const auto& spec = space.param(i);
        switch (spec.kind) {
        case ParamKind::Continuous: {
            double v = std::get<double>(out.values[i]);
            if (spec.log_scale) {
                const double lo = std::log(spec.lower);
                const double hi = std::log(spec.upper);
                double t = std::log(v) + rng.normal(0.0, 0.1 * (hi - lo));
                v = std::exp(std::clamp(t, lo, hi));
            } else {
                v = v + rng.normal(0.0, 0.1 * (spec.upper - spec.lower));
                v = std::clamp(v, spec.lower, spec.upper);
            }
            out.values[i] = v;
            break;
        }
        case ParamKind::Integer: {
            auto v = std::get<std::int64_t>(out.values[i]);
            const double step = rng.normal(0.0, std::max(1.0, 0.1 * (spec.upper - spec.lower)));
            const double moved =
                std::clamp(static_cast<double>(v) + step, spec.lower, spec.upper);
            out.values[i] = static_cast<std::int64_t>(std::llround(moved));
            break;
        }
        case ParamKind::Categorical: {
            if (rng.uniform() < 0.2)
                out.values[i] = static_cast<std::int64_t>(rng.uniform_int(spec.choices.size()));
            break;
        }
        }
    }
    return out;
}

/// Best non-failed y at the highest level holding data.
inline std::optional<double> incumbent_y(const MeasurementStore& store, const TunerParams& tuner) {
    for (int level = tuner.levels(); level >= 1; --level) {
        std::optional<double> best;
        for (const auto& m : store.group(level)) {
            if (m.failed) continue;
            if (!best || m.y < *best) best = m.y;
        }
        if (best) return best;
    }
    return std::nullopt;
}

inline std::optional<double> imputation_target(const MeasurementStore& store,
                                               const TunerParams& tuner) {
    for (int level = tuner.levels(); level >= 1; --level) {
        std::vector<double> ys;
        for (const auto& m : store.group(level))
            if (!m.failed) ys.push_back(m.y);
        if (!ys.empty()) return median(std::move(ys));
    }
    return std::nullopt;
}

inline Configuration random_avoiding_pending(const SearchSpace& space, const PendingSet& pending,
                                             Rng& rng) {
    for (int attempt = 0; attempt < 100; ++attempt) {
        auto c = sample_random(space, rng);
        if (!pending.contains(space, c)) return c;
    }
    return sample_random(space, rng);
}

}  // namespace detail

/// Proposes the next configuration: imputes pending configs with the median
/// complete-level observation, refits the level-K base on the augmented data,
/// and returns the expected-improvement argmax over a sampled candidate set.
/// Falls back to random sampling while every base is unfit.
inline Configuration suggest(const SearchSpace& space, const MeasurementStore& store,
                             const PendingSet& pending, const EnsembleSurrogate& ens,
                             const TunerParams& tuner, std::uint64_t seed,
                             const SuggestOptions& options = {}) {
    Rng rng(mix_seed(seed, 0x5347u));
    const int K = tuner.levels();

    EnsembleSurrogate working = ens;
    if (options.impute_pending && !pending.empty() &&
        static_cast<int>(ens.size()) == K && !ens.theta().empty()) {
        const auto target = detail::imputation_target(store, tuner);
        if (target) {
            auto data = encode_level(space, store, K);
            for (const auto& config : pending.configs()) {
                const auto row = encode(space, config);
                data.X.insert(data.X.end(), row.begin(), row.end());
                data.y.push_back(*target);
                ++data.n;
            }
            auto refit = std::make_shared<ForestSurrogate>();
            refit->fit(data.X, data.n, data.dim, data.y, mix_seed(seed, 0x4155u),
                       options.forest);
            working = ens.with_base(static_cast<std::size_t>(K - 1), std::move(refit));
        }
    }

    const auto best = detail::incumbent_y(store, tuner);
    if (!working.usable() || !best)
        return detail::random_avoiding_pending(space, pending, rng);

    std::vector<Configuration> candidates;
    candidates.reserve(static_cast<std::size_t>(options.n_random) +
                       static_cast<std::size_t>(options.n_chains * options.chain_length));
    for (int i = 0; i < options.n_random; ++i) candidates.push_back(sample_random(space, rng));

    std::vector<std::pair<double, Configuration>> anchors;
    {
        std::vector<std::string> seen;
        std::vector<std::pair<double, Configuration>> ranked;
        for (int level = 1; level <= K; ++level)
            for (const auto& m : store.group(level))
                if (!m.failed) ranked.emplace_back(m.y, m.config);
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        for (const auto& [y, config] : ranked) {
            const auto key = config_key(space, config);
            if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
            seen.push_back(key);
            anchors.emplace_back(y, config);
            if (static_cast<int>(anchors.size()) >= options.n_chains) break;
        }
    }
    for (std::size_t c = 0; c < anchors.size(); ++c) {
        Configuration current = anchors[c].second;
        for (int step = 0; step < options.chain_length; ++step) {
            current = detail::perturb(space, current, rng);
            candidates.push_back(current);
        }
    }

    double best_ei = -1.0;
    const Configuration* chosen = nullptr;
    for (const auto& candidate : candidates) {
        if (pending.contains(space, candidate)) continue;
        const auto x = encode(space, candidate);
        const double ei = expected_improvement(working.predict(x), *best);
        if (ei > best_ei) {
            best_ei = ei;
            chosen = &candidate;
        }
    }
    if (!chosen) return detail::random_avoiding_pending(space, pending, rng);
    return *chosen;
}

}  // namespace hypertune
