#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "kowcpi/rnw.hpp"

// Bandwidth selection for the RNW smoother: build the linear-smoother matrix
// S with S_ij = W_j(X_i), score each candidate h by the corrected
// nonparametric AIC
//     AIC_C(h) = log(RSS) + (n + tr(S S^T)) / (n - (tr(S S^T) + 2)),
// and keep the admissible minimizer.

namespace kowcpi {

struct SmootherMatrix {
    std::size_t n = 0;
    std::vector<double> entries; // row-major n x n, rows are probability vectors
    double trace_sst = 0.0;      // tr(S S^T) = sum of squared entries
    double rss = 0.0;            // residual sum of squares of the fitted values

    double entry(std::size_t i, std::size_t j) const { return entries[i * n + j]; }
};

// Row i holds the RNW weight vector with query X_i against all n predictors
// (the query's own segment stays in, as the AIC correction expects for
// linear smoothers).
inline SmootherMatrix build_smoother(const SegmentSet& segments, const KernelSpec& kernel,
                                     WeightScheme scheme = WeightScheme::rnw,
                                     double tolerance = 1e-12) {
    kernel.validate();
    const std::size_t n = segments.size();
    SmootherMatrix sm;
    sm.n = n;
    sm.entries.resize(n * n);

    std::vector<double> kernel_values, diffs;
    for (std::size_t i = 0; i < n; ++i) {
        detail::kernel_row(segments, kernel, segments.predictor(i), kernel_values, diffs);
        auto core = detail::rnw_weights_core(kernel_values, diffs, scheme, tolerance);
        double fitted = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            sm.entries[i * n + j] = core.weights[j];
            fitted += core.weights[j] * segments.responses[j];
        }
        const double err = segments.responses[i] - fitted;
        sm.rss += err * err;
    }
    // Rounding-level residuals mean the smoother interpolates exactly;
    // snap them to zero so such candidates read as inadmissible instead of
    // winning the argmin with log of noise.
    double response_scale = 0.0;
    for (double y : segments.responses) response_scale += y * y;
    if (sm.rss <= 1e-24 * response_scale) sm.rss = 0.0;
    for (double e : sm.entries) sm.trace_sst += e * e;
    return sm;
}

// Eq.-style corrected AIC value, or nullopt when the candidate is
// inadmissible: zero RSS (log undefined) or tr(SS^T) + 2 >= n (denominator
// not positive). Inadmissible candidates are excluded from the argmin.
inline std::optional<double> aic_c(const SmootherMatrix& sm, std::size_t n) {
    if (n < 4) throw std::invalid_argument("AIC requires n >= 4 segments");
    const double nn = static_cast<double>(n);
    if (!(sm.rss > 0.0) || sm.trace_sst + 2.0 >= nn) return std::nullopt;
    return std::log(sm.rss) + (nn + sm.trace_sst) / (nn - (sm.trace_sst + 2.0));
}

// Rule-of-thumb pilot bandwidth h0 = sigma_hat * n^{-1/(w+4)} with n = T - w
// segments; sigma_hat is the sample standard deviation of the residuals.
inline double rule_of_thumb_bandwidth(std::span<const double> residuals, std::size_t window) {
    if (residuals.size() < window + 2) {
        throw std::invalid_argument("too few residuals for the requested window");
    }
    const std::size_t n = residuals.size() - window;
    double mean = 0.0;
    for (double r : residuals) mean += r;
    mean /= static_cast<double>(residuals.size());
    double ss = 0.0;
    for (double r : residuals) ss += (r - mean) * (r - mean);
    double sd = std::sqrt(ss / static_cast<double>(residuals.size() - 1));
    if (!(sd > 0.0) || !std::isfinite(sd)) sd = 1.0; // constant history
    return sd * std::pow(static_cast<double>(n), -1.0 / (static_cast<double>(window) + 4.0));
}

struct BandwidthGrid {
    double pilot = 1.0;
    std::vector<double> values;
};

// Log-spaced candidate grid around the pilot, [h0/span, h0*span].
inline BandwidthGrid default_bandwidth_grid(std::span<const double> residuals, std::size_t window,
                                            std::size_t grid_size = 15, double span = 8.0) {
    if (grid_size == 0) throw std::invalid_argument("bandwidth grid size must be >= 1");
    if (!(span >= 1.0)) throw std::invalid_argument("bandwidth grid span must be >= 1");
    BandwidthGrid grid;
    grid.pilot = rule_of_thumb_bandwidth(residuals, window);
    grid.values.reserve(grid_size);
    if (grid_size == 1) {
        grid.values.push_back(grid.pilot);
        return grid;
    }
    for (std::size_t k = 0; k < grid_size; ++k) {
        const double expo = -1.0 + 2.0 * static_cast<double>(k) / (static_cast<double>(grid_size) - 1.0);
        grid.values.push_back(grid.pilot * std::pow(span, expo));
    }
    return grid;
}

struct BandwidthSelection {
    KernelSpec spec;
    bool fallback = false; // all candidates inadmissible; pilot used instead
    std::vector<std::pair<double, std::optional<double>>> curve; // (h, AIC_C)
};

// Picks the admissible grid value minimizing AIC_C; ties break toward the
// smaller h. When every candidate is inadmissible the pilot bandwidth is
// returned with the fallback flag set.
inline BandwidthSelection select_bandwidth(const SegmentSet& segments, KernelFamily family,
                                           const BandwidthGrid& grid,
                                           WeightScheme scheme = WeightScheme::rnw) {
    if (grid.values.empty()) throw std::invalid_argument("bandwidth grid must be nonempty");
    BandwidthSelection sel;
    sel.spec.family = family;
    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    for (double h : grid.values) {
        KernelSpec candidate{family, h};
        const auto sm = build_smoother(segments, candidate, scheme);
        const auto score = aic_c(sm, segments.size());
        sel.curve.emplace_back(h, score);
        if (score && *score < best) {
            best = *score;
            sel.spec.bandwidth = h;
            found = true;
        }
    }
    if (!found) {
        sel.spec.bandwidth = grid.pilot;
        sel.fallback = true;
    }
    return sel;
}

} // namespace kowcpi
