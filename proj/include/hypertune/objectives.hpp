#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hypertune/measurement.hpp"
#include "hypertune/rng.hpp"
#include "hypertune/search_space.hpp"

namespace hypertune {

struct EvalResult {
    double y = 0.0;
    double cost_seconds = 1.0;
    bool failed = false;
};

/// A tunable target. Evaluations are deterministic given the objective's own
/// seed plus (config, level); cost is the declared per-level cost model and
/// drives the simulated clock.
class Objective {
public:
    virtual ~Objective() = default;
    virtual const SearchSpace& space() const = 0;
    virtual const TunerParams& tuner() const = 0;
    virtual EvalResult evaluate(const Configuration& config, int level) = 0;
    virtual double cost(const Configuration& config, int level) const = 0;
    /// Whether a promotion continues prior work (charged incrementally).
    virtual bool resumable() const { return false; }
    /// Noise-free objective value, where the benchmark knows it.
    virtual std::optional<double> true_value(const Configuration&) const { return std::nullopt; }
    virtual std::optional<double> optimum() const { return std::nullopt; }

protected:
    static std::uint64_t eval_seed(std::uint64_t base, const SearchSpace& space,
                                   const Configuration& config, int level) {
        const auto key = config_key(space, config);
        return mix_seed(mix_seed(base, fnv1a64(key)), static_cast<std::uint64_t>(level));
    }
};

/// Sum of binary flags and Bernoulli success rates, negated so lower is
/// better. Level i estimates each continuous term with the mean of
/// b_i = eta^(i-1) * b_base draws; the top level uses the rate exactly.
class CountingOnesObjective final : public Objective {
public:
    CountingOnesObjective(int d_cat, int d_cont, TunerParams tuner, std::uint64_t seed,
                          int b_base = 9, double unit_cost = 1.0)
        : tuner_(tuner),
          space_(make_space(d_cat, d_cont)),
          d_cat_(d_cat),
          d_cont_(d_cont),
          seed_(seed),
          b_base_(b_base),
          unit_cost_(unit_cost) {
        if (d_cat < 0 || d_cont < 0 || d_cat + d_cont < 1)
            throw std::invalid_argument("counting_ones: need at least one dimension");
        if (b_base < 1) throw std::invalid_argument("counting_ones: b_base must be >= 1");
        if (unit_cost <= 0.0) throw std::invalid_argument("counting_ones: unit_cost must be > 0");
    }

    const SearchSpace& space() const override { return space_; }
    const TunerParams& tuner() const override { return tuner_; }
    bool resumable() const override { return true; }

    std::int64_t draws(int level) const {
        return tuner_.resource_units(level) * static_cast<std::int64_t>(b_base_);
    }

    double cost(const Configuration&, int level) const override {
        return static_cast<double>(draws(level)) * d_cont_ * unit_cost_ + d_cat_ * unit_cost_;
    }

    EvalResult evaluate(const Configuration& config, int level) override {
        double total = 0.0;
        for (int i = 0; i < d_cat_; ++i)
            total += static_cast<double>(std::get<std::int64_t>(config.values[static_cast<std::size_t>(i)]));
        if (level == tuner_.levels()) {
            for (int j = 0; j < d_cont_; ++j)
                total += std::get<double>(config.values[static_cast<std::size_t>(d_cat_ + j)]);
        } else {
            Rng rng(eval_seed(seed_, space_, config, level));
            const auto b = draws(level);
            for (int j = 0; j < d_cont_; ++j) {
                const double p = std::get<double>(config.values[static_cast<std::size_t>(d_cat_ + j)]);
                std::int64_t hits = 0;
                for (std::int64_t t = 0; t < b; ++t) hits += rng.bernoulli(p) ? 1 : 0;
                total += static_cast<double>(hits) / static_cast<double>(b);
            }
        }
        const double d = static_cast<double>(d_cat_ + d_cont_);
        return {-total / d, cost(config, level), false};
    }

    std::optional<double> true_value(const Configuration& config) const override {
        double total = 0.0;
        for (int i = 0; i < d_cat_; ++i)
            total += static_cast<double>(std::get<std::int64_t>(config.values[static_cast<std::size_t>(i)]));
        for (int j = 0; j < d_cont_; ++j)
            total += std::get<double>(config.values[static_cast<std::size_t>(d_cat_ + j)]);
        return -total / static_cast<double>(d_cat_ + d_cont_);
    }

    std::optional<double> optimum() const override { return -1.0; }

private:
    static SearchSpace make_space(int d_cat, int d_cont) {
        std::vector<ParamSpec> params;
        for (int i = 0; i < d_cat; ++i)
            params.push_back(
                ParamSpec::categorical("c" + std::to_string(i + 1), {"0", "1"}));
        for (int j = 0; j < d_cont; ++j)
            params.push_back(ParamSpec::continuous("p" + std::to_string(j + 1), 0.0, 1.0));
        return SearchSpace(std::move(params));
    }

    TunerParams tuner_;
    SearchSpace space_;
    int d_cat_;
    int d_cont_;
    std::uint64_t seed_;
    int b_base_;
    double unit_cost_;
};

/// Squared distance to a fixed point in the encoded cube, plus Gaussian
/// fidelity noise with variance alpha * (1/r_level - 1/r_K). The top level
/// is noise free.
class NoisyParaboloidObjective final : public Objective {
public:
    NoisyParaboloidObjective(int d, double alpha, TunerParams tuner, std::uint64_t seed,
                             std::vector<double> x_star = {}, double unit_cost = 1.0,
                             bool resumable = false)
        : tuner_(tuner),
          space_(make_space(d)),
          alpha_(alpha),
          seed_(seed),
          x_star_(std::move(x_star)),
          unit_cost_(unit_cost),
          resumable_(resumable) {
        if (d < 1) throw std::invalid_argument("noisy_paraboloid: d must be >= 1");
        if (alpha < 0.0) throw std::invalid_argument("noisy_paraboloid: alpha must be >= 0");
        if (unit_cost <= 0.0)
            throw std::invalid_argument("noisy_paraboloid: unit_cost must be > 0");
        if (x_star_.empty()) x_star_.assign(static_cast<std::size_t>(d), 0.5);
        if (x_star_.size() != static_cast<std::size_t>(d))
            throw std::invalid_argument("noisy_paraboloid: x_star dimension mismatch");
        for (double v : x_star_)
            if (v < 0.0 || v > 1.0)
                throw std::invalid_argument("noisy_paraboloid: x_star outside [0,1]");
    }

    const SearchSpace& space() const override { return space_; }
    const TunerParams& tuner() const override { return tuner_; }
    bool resumable() const override { return resumable_; }

    double noise_variance(int level) const {
        const double r = static_cast<double>(tuner_.resource_units(level));
        const double r_top = static_cast<double>(tuner_.resource_units(tuner_.levels()));
        return alpha_ * (1.0 / r - 1.0 / r_top);
    }

    double cost(const Configuration&, int level) const override {
        return static_cast<double>(tuner_.resource_units(level)) * unit_cost_;
    }

    EvalResult evaluate(const Configuration& config, int level) override {
        double y = *true_value(config);
        const double var = noise_variance(level);
        if (var > 0.0) {
            Rng rng(eval_seed(seed_, space_, config, level));
            y += rng.normal(0.0, std::sqrt(var));
        }
        return {y, cost(config, level), false};
    }

    std::optional<double> true_value(const Configuration& config) const override {
        const auto x = encode(space_, config);
        double total = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double diff = x[i] - x_star_[i];
            total += diff * diff;
        }
        return total;
    }

    std::optional<double> optimum() const override { return 0.0; }

private:
    static SearchSpace make_space(int d) {
        std::vector<ParamSpec> params;
        for (int i = 0; i < d; ++i)
            params.push_back(ParamSpec::continuous("x" + std::to_string(i + 1), 0.0, 1.0));
        return SearchSpace(std::move(params));
    }

    TunerParams tuner_;
    SearchSpace space_;
    double alpha_;
    std::uint64_t seed_;
    std::vector<double> x_star_;
    double unit_cost_;
    bool resumable_;
};

inline std::unique_ptr<Objective> counting_ones(int d_cat, int d_cont, TunerParams tuner,
                                                std::uint64_t seed, int b_base = 9,
                                                double unit_cost = 1.0) {
    return std::make_unique<CountingOnesObjective>(d_cat, d_cont, tuner, seed, b_base,
                                                   unit_cost);
}

inline std::unique_ptr<Objective> noisy_paraboloid(int d, double alpha, TunerParams tuner,
                                                   std::uint64_t seed,
                                                   std::vector<double> x_star = {},
                                                   double unit_cost = 1.0,
                                                   bool resumable = false) {
    return std::make_unique<NoisyParaboloidObjective>(d, alpha, tuner, seed,
                                                      std::move(x_star), unit_cost, resumable);
}

}  // namespace hypertune
