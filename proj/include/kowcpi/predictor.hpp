#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kowcpi/errors.hpp"
#include "kowcpi/rng.hpp"

// Point predictors producing y_hat from lagged features. The conformal layer
// treats the predictor as a black box that is fitted once and never
// retrained during the prediction phase.

namespace kowcpi {

enum class PredictorKind { lag_least_squares, random_forest, external };

inline std::string_view to_string(PredictorKind kind) {
    switch (kind) {
    case PredictorKind::lag_least_squares: return "lag-least-squares";
    case PredictorKind::random_forest: return "random-forest";
    case PredictorKind::external: return "external";
    }
    return "unknown";
}

inline PredictorKind predictor_kind_from_string(std::string_view name) {
    if (name == "lag-least-squares" || name == "lag_least_squares") {
        return PredictorKind::lag_least_squares;
    }
    if (name == "random-forest" || name == "random_forest") return PredictorKind::random_forest;
    if (name == "external") return PredictorKind::external;
    throw std::invalid_argument("unknown predictor kind '" + std::string(name) + "'");
}

struct PredictorSpec {
    PredictorKind kind = PredictorKind::random_forest;
    std::size_t lags = 0; // 0 = resolved by the harness (fixed window, else 10)
    double ridge = 0.0;
    std::size_t trees = 10;
    std::size_t max_depth = 8;
    std::size_t min_leaf = 3;
    std::size_t features_per_split = 0; // 0 = ceil(lags / 3)
    std::string path;                   // external predictions CSV

    void validate() const {
        if (!(ridge >= 0.0) || !std::isfinite(ridge)) {
            throw std::invalid_argument("ridge penalty must be a nonnegative finite real");
        }
        if (kind == PredictorKind::random_forest) {
            if (trees < 1) throw std::invalid_argument("random forest needs trees >= 1");
            if (min_leaf < 1) throw std::invalid_argument("random forest needs min_leaf >= 1");
            if (max_depth < 1) throw std::invalid_argument("random forest needs max_depth >= 1");
        }
        if (kind == PredictorKind::external && path.empty()) {
            throw std::invalid_argument("external predictor needs a predictions file path");
        }
    }
};

// Lag feature vector for time t: (y_{t-1}, y_{t-2}, ..., y_{t-d}), most
// recent first.
inline std::vector<double> lag_features(std::span<const double> series, std::size_t t,
                                        std::size_t lags) {
    if (t < lags) throw std::invalid_argument("not enough history for lag features");
    std::vector<double> x(lags);
    for (std::size_t j = 0; j < lags; ++j) x[j] = series[t - 1 - j];
    return x;
}

namespace detail {

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    double value = 0.0;
    int left = -1;
    int right = -1;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;

    double predict(std::span<const double> x) const {
        int idx = 0;
        while (nodes[idx].feature >= 0) {
            idx = (x[static_cast<std::size_t>(nodes[idx].feature)] <= nodes[idx].threshold)
                      ? nodes[idx].left
                      : nodes[idx].right;
        }
        return nodes[idx].value;
    }
};

struct SplitChoice {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double score = 0.0; // children SSE to minimize
};

class TreeBuilder {
public:
    TreeBuilder(const std::vector<double>& features, const std::vector<double>& targets,
                std::size_t dims, std::size_t max_depth, std::size_t min_leaf, std::size_t mtry,
                Rng& rng)
        : features_(features), targets_(targets), dims_(dims), max_depth_(max_depth),
          min_leaf_(min_leaf), mtry_(mtry), rng_(rng) {}

    RegressionTree build(std::vector<std::size_t> samples) {
        tree_.nodes.clear();
        grow(std::move(samples), 0);
        return std::move(tree_);
    }

private:
    double x_at(std::size_t row, std::size_t col) const { return features_[row * dims_ + col]; }

    int make_leaf(const std::vector<std::size_t>& samples) {
        double mean = 0.0;
        for (std::size_t i : samples) mean += targets_[i];
        mean /= static_cast<double>(samples.size());
        TreeNode node;
        node.value = mean;
        tree_.nodes.push_back(node);
        return static_cast<int>(tree_.nodes.size() - 1);
    }

    SplitChoice best_split(const std::vector<std::size_t>& samples) {
        SplitChoice best;
        // Random feature subset, partial Fisher-Yates.
        std::vector<std::size_t> feats(dims_);
        std::iota(feats.begin(), feats.end(), std::size_t{0});
        const std::size_t take = std::min(mtry_, dims_);
        for (std::size_t k = 0; k < take; ++k) {
            const std::size_t pick = k + rng_.uniform_index(dims_ - k);
            std::swap(feats[k], feats[pick]);
        }

        const std::size_t count = samples.size();
        std::vector<std::pair<double, double>> pairs(count);
        for (std::size_t f = 0; f < take; ++f) {
            const std::size_t feature = feats[f];
            for (std::size_t i = 0; i < count; ++i) {
                pairs[i] = {x_at(samples[i], feature), targets_[samples[i]]};
            }
            std::sort(pairs.begin(), pairs.end());
            double left_sum = 0.0, left_sq = 0.0;
            double total_sum = 0.0, total_sq = 0.0;
            for (const auto& p : pairs) {
                total_sum += p.second;
                total_sq += p.second * p.second;
            }
            for (std::size_t pos = 1; pos < count; ++pos) {
                left_sum += pairs[pos - 1].second;
                left_sq += pairs[pos - 1].second * pairs[pos - 1].second;
                if (pos < min_leaf_ || count - pos < min_leaf_) continue;
                if (pairs[pos - 1].first == pairs[pos].first) continue; // no boundary here
                const double nl = static_cast<double>(pos);
                const double nr = static_cast<double>(count - pos);
                const double sse_left = left_sq - left_sum * left_sum / nl;
                const double sse_right =
                    (total_sq - left_sq) - (total_sum - left_sum) * (total_sum - left_sum) / nr;
                const double score = sse_left + sse_right;
                if (!best.found || score < best.score) {
                    best.found = true;
                    best.feature = feature;
                    best.threshold = 0.5 * (pairs[pos - 1].first + pairs[pos].first);
                    best.score = score;
                }
            }
        }
        return best;
    }

    int grow(std::vector<std::size_t> samples, std::size_t depth) {
        if (depth >= max_depth_ || samples.size() < 2 * min_leaf_) return make_leaf(samples);
        const auto split = best_split(samples);
        if (!split.found) return make_leaf(samples);

        std::vector<std::size_t> left, right;
        for (std::size_t i : samples) {
            (x_at(i, split.feature) <= split.threshold ? left : right).push_back(i);
        }
        TreeNode node;
        node.feature = static_cast<int>(split.feature);
        node.threshold = split.threshold;
        tree_.nodes.push_back(node);
        const int idx = static_cast<int>(tree_.nodes.size() - 1);
        const int li = grow(std::move(left), depth + 1);
        const int ri = grow(std::move(right), depth + 1);
        tree_.nodes[static_cast<std::size_t>(idx)].left = li;
        tree_.nodes[static_cast<std::size_t>(idx)].right = ri;
        return idx;
    }

    const std::vector<double>& features_;
    const std::vector<double>& targets_;
    std::size_t dims_;
    std::size_t max_depth_;
    std::size_t min_leaf_;
    std::size_t mtry_;
    Rng& rng_;
    RegressionTree tree_;
};

} // namespace detail

class FittedPredictor {
public:
    PredictorKind kind() const { return kind_; }
    std::size_t lags() const { return lags_; }
    bool time_indexed() const { return kind_ == PredictorKind::external; }

    double predict(std::span<const double> x) const {
        if (kind_ == PredictorKind::external) {
            throw std::logic_error("external predictor is time-indexed; use predict_at");
        }
        if (x.size() != lags_) {
            throw std::invalid_argument("feature dimension mismatch: expected " +
                                        std::to_string(lags_) + ", got " +
                                        std::to_string(x.size()));
        }
        if (kind_ == PredictorKind::lag_least_squares) {
            double out = intercept_;
            for (std::size_t j = 0; j < lags_; ++j) out += coef_[j] * x[j];
            return out;
        }
        double sum = 0.0;
        for (const auto& tree : forest_) sum += tree.predict(x);
        return sum / static_cast<double>(forest_.size());
    }

    double predict_at(long long t) const {
        auto it = by_time_.find(t);
        if (it == by_time_.end()) {
            throw DataError("external predictions file has no entry for t=" + std::to_string(t));
        }
        return it->second;
    }

    // Out-of-bag prediction for a training row (series index within the fit
    // span): the average over trees whose bootstrap excluded the row. Gives
    // honest residuals on the training data itself; empty when the model is
    // not a forest, the index is outside the fit span, or every tree saw
    // the row.
    std::optional<double> oob_prediction_at(std::size_t t) const {
        if (kind_ != PredictorKind::random_forest) return std::nullopt;
        if (t < lags_ || t - lags_ >= oob_sum_.size()) return std::nullopt;
        const std::size_t row = t - lags_;
        if (oob_count_[row] == 0) return std::nullopt;
        return oob_sum_[row] / static_cast<double>(oob_count_[row]);
    }

private:
    friend FittedPredictor fit_predictor(const PredictorSpec&, std::span<const double>,
                                         std::uint64_t);
    friend FittedPredictor external_predictor(std::vector<std::pair<long long, double>>);

    PredictorKind kind_ = PredictorKind::lag_least_squares;
    std::size_t lags_ = 0;
    double intercept_ = 0.0;
    std::vector<double> coef_;
    std::vector<detail::RegressionTree> forest_;
    std::vector<double> oob_sum_;        // per training row, over excluding trees
    std::vector<std::uint32_t> oob_count_;
    std::unordered_map<long long, double> by_time_;
};

inline FittedPredictor external_predictor(std::vector<std::pair<long long, double>> table) {
    FittedPredictor model;
    model.kind_ = PredictorKind::external;
    for (const auto& [t, yhat] : table) model.by_time_[t] = yhat;
    return model;
}

// Fits the configured model on a training series: lag features are built
// from the d previous values for every target index. The external kind is
// loaded through csv.hpp / runner.hpp instead.
inline FittedPredictor fit_predictor(const PredictorSpec& spec, std::span<const double> series,
                                     std::uint64_t seed) {
    spec.validate();
    if (spec.kind == PredictorKind::external) {
        throw std::invalid_argument("external predictor is loaded from file, not fitted");
    }
    const std::size_t d = spec.lags;
    if (d < 1) throw std::invalid_argument("predictor lag count must be >= 1");
    if (series.size() <= d + 10) {
        throw std::invalid_argument("insufficient training data: need more than d + 10 = " +
                                    std::to_string(d + 10) + " points, got " +
                                    std::to_string(series.size()));
    }

    const std::size_t rows = series.size() - d;
    std::vector<double> features(rows * d);
    std::vector<double> targets(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t t = r + d;
        for (std::size_t j = 0; j < d; ++j) features[r * d + j] = series[t - 1 - j];
        targets[r] = series[t];
    }

    FittedPredictor model;
    model.kind_ = spec.kind;
    model.lags_ = d;

    if (spec.kind == PredictorKind::lag_least_squares) {
        // Centered ridge solve; the intercept stays unpenalized and constant
        // features drop out of the system.
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
            X(features.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
        Eigen::Map<const Eigen::VectorXd> y(targets.data(), static_cast<Eigen::Index>(rows));
        const Eigen::RowVectorXd x_mean = X.colwise().mean();
        const double y_mean = y.mean();
        const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
        const Eigen::VectorXd yc = y.array() - y_mean;
        Eigen::MatrixXd gram = Xc.transpose() * Xc;
        gram.diagonal().array() += spec.ridge;
        const Eigen::VectorXd beta = gram.ldlt().solve(Xc.transpose() * yc);
        model.coef_.assign(beta.data(), beta.data() + beta.size());
        model.intercept_ = y_mean - x_mean.dot(beta);
        return model;
    }

    const std::size_t mtry =
        spec.features_per_split > 0
            ? spec.features_per_split
            : static_cast<std::size_t>(std::ceil(static_cast<double>(d) / 3.0));
    model.forest_.reserve(spec.trees);
    model.oob_sum_.assign(rows, 0.0);
    model.oob_count_.assign(rows, 0);
    std::vector<char> in_bag(rows);
    for (std::size_t k = 0; k < spec.trees; ++k) {
        Rng rng = Rng::stream(seed, "rf-tree", k);
        std::vector<std::size_t> bootstrap(rows);
        std::fill(in_bag.begin(), in_bag.end(), 0);
        for (auto& idx : bootstrap) {
            idx = rng.uniform_index(rows);
            in_bag[idx] = 1;
        }
        detail::TreeBuilder builder(features, targets, d, spec.max_depth, spec.min_leaf, mtry,
                                    rng);
        model.forest_.push_back(builder.build(std::move(bootstrap)));
        const auto& tree = model.forest_.back();
        for (std::size_t r = 0; r < rows; ++r) {
            if (in_bag[r]) continue;
            model.oob_sum_[r] += tree.predict({features.data() + r * d, d});
            ++model.oob_count_[r];
        }
    }
    return model;
}

} // namespace kowcpi
