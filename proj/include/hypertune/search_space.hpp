#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "hypertune/rng.hpp"

namespace hypertune {

class SpaceError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class ParamKind { Continuous, Integer, Categorical };

/// One tunable dimension of the search space.
struct ParamSpec {
    std::string name;
    ParamKind kind = ParamKind::Continuous;
    double lower = 0.0;                 // continuous / integer
    double upper = 1.0;                 // continuous / integer
    bool log_scale = false;             // continuous / integer
    std::vector<std::string> choices;   // categorical

    bool operator==(const ParamSpec&) const = default;

    static ParamSpec continuous(std::string name, double lower, double upper, bool log_scale = false) {
        ParamSpec p;
        p.name = std::move(name);
        p.kind = ParamKind::Continuous;
        p.lower = lower;
        p.upper = upper;
        p.log_scale = log_scale;
        return p;
    }

    static ParamSpec integer(std::string name, std::int64_t lower, std::int64_t upper, bool log_scale = false) {
        ParamSpec p;
        p.name = std::move(name);
        p.kind = ParamKind::Integer;
        p.lower = static_cast<double>(lower);
        p.upper = static_cast<double>(upper);
        p.log_scale = log_scale;
        return p;
    }

    static ParamSpec categorical(std::string name, std::vector<std::string> choices) {
        ParamSpec p;
        p.name = std::move(name);
        p.kind = ParamKind::Categorical;
        p.choices = std::move(choices);
        return p;
    }

    /// Width of this param in the encoded vector (one-hot for categoricals).
    std::size_t encoded_width() const {
        return kind == ParamKind::Categorical ? choices.size() : 1;
    }

    void validate() const {
        if (name.empty()) throw SpaceError("param name must be non-empty");
        if (kind == ParamKind::Categorical) {
            if (choices.empty()) throw SpaceError("param '" + name + "': choices must be non-empty");
            std::set<std::string> seen(choices.begin(), choices.end());
            if (seen.size() != choices.size())
                throw SpaceError("param '" + name + "': duplicate choices");
        } else {
            if (!(lower < upper))
                throw SpaceError("param '" + name + "': lower must be < upper");
            if (log_scale && !(lower > 0.0))
                throw SpaceError("param '" + name + "': log scale requires lower > 0");
        }
    }
};

/// Value of one param: real, integer, or categorical choice index.
using ParamValue = std::variant<double, std::int64_t>;

/// A point in the search space. Values are stored in space declaration
/// order; all operations take the owning SearchSpace explicitly.
struct Configuration {
    std::vector<ParamValue> values;

    bool operator==(const Configuration&) const = default;
};

/// Ordered list of ParamSpecs; encoding and config keys depend on the order.
class SearchSpace {
public:
    SearchSpace() = default;

    explicit SearchSpace(std::vector<ParamSpec> params) : params_(std::move(params)) {
        if (params_.empty()) throw SpaceError("search space needs at least one param");
        std::set<std::string> names;
        for (const auto& p : params_) {
            p.validate();
            if (!names.insert(p.name).second)
                throw SpaceError("duplicate param name '" + p.name + "'");
        }
        encoded_dim_ = 0;
        for (const auto& p : params_) encoded_dim_ += p.encoded_width();
    }

    const std::vector<ParamSpec>& params() const { return params_; }
    std::size_t dimension() const { return params_.size(); }
    std::size_t encoded_dimension() const { return encoded_dim_; }

    const ParamSpec& param(std::size_t i) const { return params_.at(i); }

    std::size_t index_of(std::string_view name) const {
        for (std::size_t i = 0; i < params_.size(); ++i)
            if (params_[i].name == name) return i;
        throw SpaceError("unknown param '" + std::string(name) + "'");
    }

    void check(const Configuration& config) const {
        if (config.values.size() != params_.size())
            throw SpaceError("configuration has " + std::to_string(config.values.size()) +
                             " values, space has " + std::to_string(params_.size()) + " params");
        for (std::size_t i = 0; i < params_.size(); ++i) {
            const auto& p = params_[i];
            const auto& v = config.values[i];
            switch (p.kind) {
                case ParamKind::Continuous: {
                    if (!std::holds_alternative<double>(v))
                        throw SpaceError("param '" + p.name + "': expected real value");
                    const double x = std::get<double>(v);
                    if (!std::isfinite(x) || x < p.lower || x > p.upper)
                        throw SpaceError("param '" + p.name + "': value out of bounds");
                    break;
                }
                case ParamKind::Integer: {
                    if (!std::holds_alternative<std::int64_t>(v))
                        throw SpaceError("param '" + p.name + "': expected integer value");
                    const double x = static_cast<double>(std::get<std::int64_t>(v));
                    if (x < p.lower || x > p.upper)
                        throw SpaceError("param '" + p.name + "': value out of bounds");
                    break;
                }
                case ParamKind::Categorical: {
                    if (!std::holds_alternative<std::int64_t>(v))
                        throw SpaceError("param '" + p.name + "': expected choice index");
                    const auto idx = std::get<std::int64_t>(v);
                    if (idx < 0 || static_cast<std::size_t>(idx) >= p.choices.size())
                        throw SpaceError("param '" + p.name + "': choice index out of range");
                    break;
                }
            }
        }
    }

private:
    std::vector<ParamSpec> params_;
    std::size_t encoded_dim_ = 0;
};

namespace detail {

/// Shortest round-trip rendering of a double.
inline std::string format_double(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, end);
}

}  // namespace detail

/// Canonical ordered rendering of a configuration, e.g.
/// "lr=0.01,units=64,act=relu". Used as the identity of a configuration
/// in stores, pending sets, and tabular benchmark files.
inline std::string config_key(const SearchSpace& space, const Configuration& config) {
    space.check(config);
    std::string out;
    for (std::size_t i = 0; i < space.dimension(); ++i) {
        const auto& p = space.param(i);
        if (i > 0) out += ',';
        out += p.name;
        out += '=';
        switch (p.kind) {
            case ParamKind::Continuous:
                out += detail::format_double(std::get<double>(config.values[i]));
                break;
            case ParamKind::Integer:
                out += std::to_string(std::get<std::int64_t>(config.values[i]));
                break;
            case ParamKind::Categorical:
                out += p.choices[static_cast<std::size_t>(std::get<std::int64_t>(config.values[i]))];
                break;
        }
    }
    return out;
}

/// Uniform sample from the space; log-scale params are sampled uniformly in
/// the log domain, categoricals uniformly over choices.
inline Configuration sample_random(const SearchSpace& space, Rng& rng) {
    Configuration config;
    config.values.reserve(space.dimension());
    for (const auto& p : space.params()) {
        switch (p.kind) {
            case ParamKind::Continuous: {
                double v;
                if (p.log_scale) {
                    v = std::exp(rng.uniform(std::log(p.lower), std::log(p.upper)));
                    v = std::clamp(v, p.lower, p.upper);
                } else {
                    v = rng.uniform(p.lower, p.upper);
                }
                config.values.emplace_back(v);
                break;
            }
            case ParamKind::Integer: {
                const auto lo = static_cast<std::int64_t>(p.lower);
                const auto hi = static_cast<std::int64_t>(p.upper);
                std::int64_t v;
                if (p.log_scale) {
                    const double x = std::exp(rng.uniform(std::log(p.lower), std::log(p.upper)));
                    v = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::llround(x)), lo, hi);
                } else {
                    v = lo + static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(hi - lo + 1)));
                }
                config.values.emplace_back(v);
                break;
            }
            case ParamKind::Categorical:
                config.values.emplace_back(static_cast<std::int64_t>(rng.uniform_int(p.choices.size())));
                break;
        }
    }
    return config;
}

/// Maps a configuration into [0,1]^d'. Continuous/integer params map to a
/// single axis (log-transformed first when log_scale); categoricals expand
/// to one-hot blocks.
inline std::vector<double> encode(const SearchSpace& space, const Configuration& config) {
    space.check(config);
    std::vector<double> out;
    out.reserve(space.encoded_dimension());
    for (std::size_t i = 0; i < space.dimension(); ++i) {
        const auto& p = space.param(i);
        switch (p.kind) {
            case ParamKind::Continuous:
            case ParamKind::Integer: {
                const double v = p.kind == ParamKind::Continuous
                                     ? std::get<double>(config.values[i])
                                     : static_cast<double>(std::get<std::int64_t>(config.values[i]));
                double t;
                if (p.log_scale) {
                    t = (std::log(v) - std::log(p.lower)) / (std::log(p.upper) - std::log(p.lower));
                } else {
                    t = (v - p.lower) / (p.upper - p.lower);
                }
                out.push_back(std::clamp(t, 0.0, 1.0));
                break;
            }
            case ParamKind::Categorical: {
                const auto idx = static_cast<std::size_t>(std::get<std::int64_t>(config.values[i]));
                for (std::size_t c = 0; c < p.choices.size(); ++c)
                    out.push_back(c == idx ? 1.0 : 0.0);
                break;
            }
        }
    }
    return out;
}

/// Inverse of encode. Integer axes round to the nearest grid point;
/// categorical blocks decode by argmax.
inline Configuration decode(const SearchSpace& space, std::span<const double> x) {
    if (x.size() != space.encoded_dimension())
        throw SpaceError("encoded vector has wrong dimension");
    Configuration config;
    config.values.reserve(space.dimension());
    std::size_t pos = 0;
    for (const auto& p : space.params()) {
        switch (p.kind) {
            case ParamKind::Continuous: {
                const double t = std::clamp(x[pos++], 0.0, 1.0);
                double v;
                if (p.log_scale) {
                    v = std::exp(std::log(p.lower) + t * (std::log(p.upper) - std::log(p.lower)));
                } else {
                    v = p.lower + t * (p.upper - p.lower);
                }
                config.values.emplace_back(std::clamp(v, p.lower, p.upper));
                break;
            }
            case ParamKind::Integer: {
                const double t = std::clamp(x[pos++], 0.0, 1.0);
                double v;
                if (p.log_scale) {
                    v = std::exp(std::log(p.lower) + t * (std::log(p.upper) - std::log(p.lower)));
                } else {
                    v = p.lower + t * (p.upper - p.lower);
                }
                const auto lo = static_cast<std::int64_t>(p.lower);
                const auto hi = static_cast<std::int64_t>(p.upper);
                config.values.emplace_back(std::clamp<std::int64_t>(static_cast<std::int64_t>(std::llround(v)), lo, hi));
                break;
            }
            case ParamKind::Categorical: {
                std::size_t best = 0;
                for (std::size_t c = 1; c < p.choices.size(); ++c)
                    if (x[pos + c] > x[pos + best]) best = c;
                pos += p.choices.size();
                config.values.emplace_back(static_cast<std::int64_t>(best));
                break;
            }
        }
    }
    return config;
}

}  // namespace hypertune
