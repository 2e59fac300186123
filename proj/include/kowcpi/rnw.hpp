#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kowcpi/embedding.hpp"
#include "kowcpi/kernels.hpp"

// Reweighted Nadaraya-Watson conditional CDF estimation.
//
// Given segments (X_i, Y_i) and a query segment x, the estimator places mass
//     W_i = p_i K_h(X_i - x) / sum_j p_j K_h(X_j - x)
// on the stored responses Y_i, where the adjustment weights
//     p_i = (1/n) [1 + lambda (X_i1 - x_1) K_h(X_i - x)]^{-1}
// maximize the empirical log-likelihood subject to sum p_i = 1 and a
// first-coordinate balance constraint. lambda is the stationary point of the
// convex dual L(lambda) = -sum log(1 + lambda S_i) with
// S_i = (X_i1 - x_1) K_h(X_i - x).

namespace kowcpi {

enum class WeightScheme {
    rnw,      // empirical-likelihood adjusted kernel weights
    plain_nw, // classical kernel weights W_i = K_i / sum K_j
};

inline std::string_view to_string(WeightScheme scheme) {
    return scheme == WeightScheme::rnw ? "rnw" : "plain-nw";
}

inline WeightScheme weight_scheme_from_string(std::string_view name) {
    if (name == "rnw") return WeightScheme::rnw;
    if (name == "plain-nw" || name == "plain_nw") return WeightScheme::plain_nw;
    throw std::invalid_argument("unknown weight scheme '" + std::string(name) + "'");
}

// Step-function CDF over weighted atoms, kept sorted by value with running
// cumulative weights. Right-continuous and nondecreasing.
struct WeightedEcdf {
    std::vector<double> values;     // ascending
    std::vector<double> cumulative; // running sums of the matching weights

    double cdf(double b) const {
        auto it = std::upper_bound(values.begin(), values.end(), b);
        if (it == values.begin()) return 0.0;
        // Summation of normalized weights can overshoot 1 by an ulp.
        return std::min(1.0, cumulative[static_cast<std::size_t>(it - values.begin()) - 1]);
    }

    // Smallest atom whose cumulative weight reaches beta. beta = 0 maps to
    // the minimum atom so intervals stay finite; beta = 1 maps to the
    // maximum atom. A 1e-9 slack on the comparison absorbs summation
    // rounding when beta lands exactly on a cumulative-weight boundary
    // (e.g. grid levels over uniform weights).
    double quantile(double beta) const {
        if (!(beta >= 0.0 && beta <= 1.0)) {
            throw std::invalid_argument("quantile level " + std::to_string(beta) +
                                        " outside [0, 1]");
        }
        if (values.empty()) throw std::invalid_argument("quantile of empty ECDF");
        if (beta <= 0.0) return values.front();
        auto it = std::lower_bound(cumulative.begin(), cumulative.end(), beta - 1e-9);
        if (it == cumulative.end()) return values.back();
        return values[static_cast<std::size_t>(it - cumulative.begin())];
    }
};

inline WeightedEcdf make_weighted_ecdf(std::span<const double> values,
                                       std::span<const double> weights) {
    if (values.size() != weights.size()) {
        throw std::invalid_argument("ECDF atom/weight length mismatch");
    }
    if (values.empty()) throw std::invalid_argument("ECDF needs at least one atom");
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    WeightedEcdf out;
    out.values.reserve(values.size());
    out.cumulative.reserve(values.size());
    double running = 0.0;
    for (std::size_t idx : order) {
        running += weights[idx];
        out.values.push_back(values[idx]);
        out.cumulative.push_back(running);
    }
    return out;
}

struct LambdaSolution {
    double lambda = 0.0;
    bool degenerate = false; // no interior stationary point; lambda fell back to 0
};

namespace detail {

// Stationarity residual g(lambda) = sum s_i / (1 + lambda s_i) and its
// derivative. g is strictly decreasing on the feasible interval.
inline void lambda_residual(std::span<const double> s, double lambda, double& g, double& gp) {
    g = 0.0;
    gp = 0.0;
    for (double v : s) {
        const double denom = 1.0 + lambda * v;
        g += v / denom;
        gp -= (v * v) / (denom * denom);
    }
}

} // namespace detail

// Solves g(lambda) = sum S_i / (1 + lambda S_i) = 0 over the feasible
// interval (-1/max S, -1/min S) by safeguarded bisection polished with
// Newton steps. The problem is rescaled by max|S| first so the convergence
// tolerance applies to a well-conditioned residual. With one-signed S there
// is no interior stationary point and lambda falls back to 0, degrading to
// plain kernel weights.
inline LambdaSolution solve_lambda(std::span<const double> s, double tolerance = 1e-12) {
    if (!(tolerance > 0.0)) throw std::invalid_argument("solver tolerance must be positive");
    double smax = 0.0, smin = 0.0;
    for (double v : s) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("non-finite entry in constraint products");
        }
        smax = std::max(smax, v);
        smin = std::min(smin, v);
    }
    if (!(smax > 0.0) || !(smin < 0.0)) return {0.0, true};

    const double scale = std::max(smax, -smin);
    std::vector<double> shat(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) shat[i] = s[i] / scale;

    const double lo = -scale / smax; // = -1 / max(shat)
    const double hi = -scale / smin;
    const double span = hi - lo;

    double margin = 1e-9 * span;
    double a = lo + margin;
    double b = hi - margin;
    double g, gp;
    detail::lambda_residual(shat, a, g, gp);
    double ga = g;
    while (ga <= 0.0 && margin > 1e-300) {
        margin *= 1e-3;
        a = lo + margin;
        detail::lambda_residual(shat, a, ga, gp);
    }
    margin = 1e-9 * span;
    detail::lambda_residual(shat, b, g, gp);
    double gb = g;
    while (gb >= 0.0 && margin > 1e-300) {
        margin *= 1e-3;
        b = hi - margin;
        detail::lambda_residual(shat, b, gb, gp);
    }

    double x = (a < 0.0 && b > 0.0) ? 0.0 : 0.5 * (a + b);
    for (int iter = 0; iter < 200; ++iter) {
        detail::lambda_residual(shat, x, g, gp);
        if (std::abs(g) < tolerance) break;
        if (g > 0.0) a = x; else b = x;
        double next = (gp < 0.0) ? x - g / gp : 0.5 * (a + b);
        if (!(next > a && next < b)) next = 0.5 * (a + b);
        x = next;
        if (b - a < 1e-14 * std::max(1.0, std::abs(a) + std::abs(b))) break;
    }
    // Final Newton polish, clamped to the bracket.
    for (int iter = 0; iter < 4; ++iter) {
        detail::lambda_residual(shat, x, g, gp);
        if (g == 0.0 || gp >= 0.0) break;
        const double next = x - g / gp;
        if (!(next > lo && next < hi)) break;
        x = next;
    }
    return {x / scale, false};
}

// One RNW fit at a single query point: the multiplier, adjustment weights,
// final weights, raw kernel values, and the weighted ECDF they induce over
// the stored responses.
struct RnwFit {
    double lambda = 0.0;
    bool degenerate = false;
    std::vector<double> adjustment;    // p_i
    std::vector<double> weights;       // W_i, a probability vector
    std::vector<double> kernel_values; // K_h(X_i - query)
    std::vector<double> atom_values;   // Y_i, original order
    WeightedEcdf ecdf;
};

namespace detail {

struct WeightsOnly {
    double lambda = 0.0;
    bool degenerate = false;
    std::vector<double> adjustment;
    std::vector<double> weights;
};

// Core weight computation from kernel values and first-coordinate
// differences. Solving happens on the rescaled constraint products, which
// leaves the weights invariant to any positive rescaling of the kernel.
inline WeightsOnly rnw_weights_core(std::span<const double> kernel_values,
                                    std::span<const double> first_coord_diffs,
                                    WeightScheme scheme, double tolerance) {
    const std::size_t n = kernel_values.size();
    if (n == 0) throw std::invalid_argument("RNW fit needs at least one segment");
    if (first_coord_diffs.size() != n) {
        throw std::invalid_argument("kernel/difference length mismatch in RNW fit");
    }
    for (double k : kernel_values) {
        if (!std::isfinite(k) || k < 0.0) {
            throw std::invalid_argument(
                "kernel values must be finite and nonnegative (check bandwidth scale)");
        }
    }

    WeightsOnly out;
    double kernel_sum = 0.0;
    for (double k : kernel_values) kernel_sum += k;
    if (!(kernel_sum > 0.0)) {
        // No segment inside the kernel support: uniform fallback.
        out.degenerate = true;
        out.adjustment.assign(n, 1.0 / static_cast<double>(n));
        out.weights.assign(n, 1.0 / static_cast<double>(n));
        return out;
    }

    if (scheme == WeightScheme::plain_nw) {
        out.adjustment.assign(n, 1.0 / static_cast<double>(n));
        out.weights.resize(n);
        for (std::size_t i = 0; i < n; ++i) out.weights[i] = kernel_values[i] / kernel_sum;
        return out;
    }

    std::vector<double> products(n);
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        products[i] = first_coord_diffs[i] * kernel_values[i];
        scale = std::max(scale, std::abs(products[i]));
    }
    LambdaSolution sol{0.0, true};
    if (scale > 0.0) {
        for (double& p : products) p /= scale;
        sol = solve_lambda(products, tolerance);
    }
    out.lambda = (scale > 0.0) ? sol.lambda / scale : 0.0;
    out.degenerate = sol.degenerate;

    out.adjustment.resize(n);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.adjustment[i] = inv_n / (1.0 + sol.lambda * products[i]);
    }

    out.weights.resize(n);
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out.weights[i] = out.adjustment[i] * kernel_values[i];
        norm += out.weights[i];
    }
    if (!(norm > 0.0)) {
        out.degenerate = true;
        out.weights.assign(n, inv_n);
        return out;
    }
    for (double& w : out.weights) w /= norm;
    return out;
}

} // namespace detail

// Fits RNW weights directly from kernel values, first-coordinate differences
// and atom values. Lower-level entry used by the smoother matrix and by
// scale-invariance checks; fit_rnw below derives these arrays from a
// SegmentSet.
inline RnwFit fit_rnw_from_values(std::vector<double> kernel_values,
                                  std::vector<double> first_coord_diffs,
                                  std::vector<double> atom_values,
                                  WeightScheme scheme = WeightScheme::rnw,
                                  double tolerance = 1e-12) {
    if (atom_values.size() != kernel_values.size()) {
        throw std::invalid_argument("atom/kernel length mismatch in RNW fit");
    }
    auto core = detail::rnw_weights_core(kernel_values, first_coord_diffs, scheme, tolerance);
    RnwFit fit;
    fit.lambda = core.lambda;
    fit.degenerate = core.degenerate;
    fit.adjustment = std::move(core.adjustment);
    fit.weights = std::move(core.weights);
    fit.kernel_values = std::move(kernel_values);
    fit.atom_values = std::move(atom_values);
    fit.ecdf = make_weighted_ecdf(fit.atom_values, fit.weights);
    return fit;
}

namespace detail {

inline void kernel_row(const SegmentSet& segments, const KernelSpec& kernel,
                       std::span<const double> query, std::vector<double>& kernel_values,
                       std::vector<double>& first_coord_diffs) {
    const std::size_t n = segments.size();
    const std::size_t w = segments.window;
    kernel_values.resize(n);
    first_coord_diffs.resize(n);
    std::vector<double> diff(w);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = segments.predictor(i);
        for (std::size_t j = 0; j < w; ++j) diff[j] = row[j] - query[j];
        kernel_values[i] = eval_kernel(kernel, diff, w);
        first_coord_diffs[i] = row[0] - query[0];
    }
}

} // namespace detail

inline RnwFit fit_rnw(const SegmentSet& segments, const KernelSpec& kernel,
                      double tolerance = 1e-12) {
    kernel.validate();
    std::vector<double> kernel_values, diffs;
    detail::kernel_row(segments, kernel, segments.query, kernel_values, diffs);
    return fit_rnw_from_values(std::move(kernel_values), std::move(diffs), segments.responses,
                               WeightScheme::rnw, tolerance);
}

// Classical Nadaraya-Watson weights (lambda fixed at zero, W_i = K_i / sum K).
inline RnwFit fit_plain_nw(const SegmentSet& segments, const KernelSpec& kernel) {
    kernel.validate();
    std::vector<double> kernel_values, diffs;
    detail::kernel_row(segments, kernel, segments.query, kernel_values, diffs);
    return fit_rnw_from_values(std::move(kernel_values), std::move(diffs), segments.responses,
                               WeightScheme::plain_nw, 1e-12);
}

inline RnwFit fit_scheme(const SegmentSet& segments, const KernelSpec& kernel,
                         WeightScheme scheme, double tolerance = 1e-12) {
    return scheme == WeightScheme::rnw ? fit_rnw(segments, kernel, tolerance)
                                       : fit_plain_nw(segments, kernel);
}

inline double rnw_cdf(const RnwFit& fit, double b) { return fit.ecdf.cdf(b); }

inline double rnw_quantile(const RnwFit& fit, double beta) { return fit.ecdf.quantile(beta); }

// Worst quantization error of the weighted ECDF's generalized inverse:
// sup_beta |F(Q_beta) - beta| = max_i W_i.
inline double discrete_gap(const RnwFit& fit) {
    double gap = 0.0;
    for (double w : fit.weights) gap = std::max(gap, w);
    return gap;
}

} // namespace kowcpi
