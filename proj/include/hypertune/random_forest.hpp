#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "hypertune/rng.hpp"

namespace hypertune {

struct ForestOptions {
    int n_trees = 24;
    int max_depth = 30;
    int min_samples_split = 2;
    double feature_fraction = 1.0 / 3.0;  // features tried per split
    bool bootstrap = true;

    bool operator==(const ForestOptions&) const = default;
};

/// Ensemble of randomized regression trees. The predictive mean is the
/// average over trees and the predictive variance is the across-tree
/// variance, which makes the forest usable as a probabilistic surrogate.
class RegressionForest {
public:
    /// X is row-major, n rows by dim columns. Deterministic given seed.
    void fit(std::span<const double> X, std::size_t n, std::size_t dim,
             std::span<const double> y, std::uint64_t seed, const ForestOptions& options = {}) {
        if (n == 0 || y.size() != n || X.size() != n * dim)
            throw std::invalid_argument("RegressionForest::fit: shape mismatch");
        dim_ = dim;
        trees_.assign(static_cast<std::size_t>(options.n_trees), Tree{});
        for (std::size_t t = 0; t < trees_.size(); ++t) {
            Rng rng(mix_seed(seed, t));
            std::vector<std::size_t> idx(n);
            if (options.bootstrap) {
                for (auto& i : idx) i = rng.uniform_int(n);
            } else {
                std::iota(idx.begin(), idx.end(), 0);
            }
            Builder builder{X, y, n, dim, options, rng};
            builder.build(trees_[t], std::move(idx));
        }
    }

    bool trained() const { return !trees_.empty(); }
    std::size_t dimension() const { return dim_; }

    /// Returns {mean, variance}.
    std::pair<double, double> predict(std::span<const double> x) const {
        if (trees_.empty()) throw std::logic_error("RegressionForest::predict before fit");
        double sum = 0.0;
        double sumsq = 0.0;
        for (const auto& tree : trees_) {
            const double v = tree.predict(x);
            sum += v;
            sumsq += v * v;
        }
        const double n = static_cast<double>(trees_.size());
        const double mean = sum / n;
        const double var = std::max(0.0, sumsq / n - mean * mean);
        return {mean, var};
    }

private:
    struct Node {
        int feature = -1;  // -1: leaf
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        double value = 0.0;
    };

    struct Tree {
        std::vector<Node> nodes;

        double predict(std::span<const double> x) const {
            int cur = 0;
            while (nodes[static_cast<std::size_t>(cur)].feature >= 0) {
                const auto& nd = nodes[static_cast<std::size_t>(cur)];
                cur = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
            }
            return nodes[static_cast<std::size_t>(cur)].value;
        }
    };

    struct Builder {
        std::span<const double> X;
        std::span<const double> y;
        std::size_t n;
        std::size_t dim;
        const ForestOptions& options;
        Rng& rng;

        double at(std::size_t row, std::size_t col) const { return X[row * dim + col]; }

        void build(Tree& tree, std::vector<std::size_t> idx) {
            tree.nodes.clear();
            grow(tree, std::move(idx), 0);
        }

        int grow(Tree& tree, std::vector<std::size_t> idx, int depth) {
            const int node_id = static_cast<int>(tree.nodes.size());
            tree.nodes.emplace_back();

            double sum = 0.0;
            for (auto i : idx) sum += y[i];
            const double mean = sum / static_cast<double>(idx.size());
            tree.nodes[static_cast<std::size_t>(node_id)].value = mean;

            if (depth >= options.max_depth || idx.size() < static_cast<std::size_t>(options.min_samples_split))
                return node_id;

            bool all_equal = true;
            for (auto i : idx)
                if (y[i] != y[idx[0]]) { all_equal = false; break; }
            if (all_equal) return node_id;

            int best_feature = -1;
            double best_threshold = 0.0;
            double best_score = -1.0;
            const auto features = sample_features();
            std::vector<std::size_t> order;
            for (int f : features) {
                order = idx;
                std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                    return at(a, static_cast<std::size_t>(f)) < at(b, static_cast<std::size_t>(f));
                });
                // score = sum_l^2/n_l + sum_r^2/n_r; maximizing it minimizes SSE
                double left_sum = 0.0;
                for (std::size_t j = 0; j + 1 < order.size(); ++j) {
                    left_sum += y[order[j]];
                    const double xa = at(order[j], static_cast<std::size_t>(f));
                    const double xb = at(order[j + 1], static_cast<std::size_t>(f));
                    if (xa == xb) continue;
                    const double nl = static_cast<double>(j + 1);
                    const double nr = static_cast<double>(order.size() - j - 1);
                    const double right_sum = sum - left_sum;
                    const double score = left_sum * left_sum / nl + right_sum * right_sum / nr;
                    if (score > best_score) {
                        best_score = score;
                        best_feature = f;
                        best_threshold = xa + (xb - xa) / 2.0;
                    }
                }
            }
            if (best_feature < 0) return node_id;

            std::vector<std::size_t> left_idx;
            std::vector<std::size_t> right_idx;
            for (auto i : idx) {
                if (at(i, static_cast<std::size_t>(best_feature)) <= best_threshold)
                    left_idx.push_back(i);
                else
                    right_idx.push_back(i);
            }
            if (left_idx.empty() || right_idx.empty()) return node_id;
            idx.clear();
            idx.shrink_to_fit();

            tree.nodes[static_cast<std::size_t>(node_id)].feature = best_feature;
            tree.nodes[static_cast<std::size_t>(node_id)].threshold = best_threshold;
            const int left = grow(tree, std::move(left_idx), depth + 1);
            tree.nodes[static_cast<std::size_t>(node_id)].left = left;
            const int right = grow(tree, std::move(right_idx), depth + 1);
            tree.nodes[static_cast<std::size_t>(node_id)].right = right;
            return node_id;
        }

        std::vector<int> sample_features() const {
            const auto want = static_cast<std::size_t>(std::max(
                1.0, std::round(options.feature_fraction * static_cast<double>(dim))));
            std::vector<int> all(dim);
            std::iota(all.begin(), all.end(), 0);
            if (want >= dim) return all;
            for (std::size_t i = 0; i < want; ++i)
                std::swap(all[i], all[i + rng.uniform_int(dim - i)]);
            all.resize(want);
            return all;
        }
    };

    std::size_t dim_ = 0;
    std::vector<Tree> trees_;
};

}  // namespace hypertune
