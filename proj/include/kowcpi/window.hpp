#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kowcpi/embedding.hpp"

// Window length selection: either a fixed w, cross-validation over a
// candidate list on a validation split, or per-step adaptive selection via a
// two-sample Kolmogorov-Smirnov test between the most recent w residuals and
// the w residuals immediately preceding them.

namespace kowcpi {

enum class WindowMode { fixed, cv, adaptive };

inline std::string_view to_string(WindowMode mode) {
    switch (mode) {
    case WindowMode::fixed: return "fixed";
    case WindowMode::cv: return "cv";
    case WindowMode::adaptive: return "adaptive";
    }
    return "unknown";
}

inline WindowMode window_mode_from_string(std::string_view name) {
    if (name == "fixed") return WindowMode::fixed;
    if (name == "cv") return WindowMode::cv;
    if (name == "adaptive") return WindowMode::adaptive;
    throw std::invalid_argument("unknown window mode '" + std::string(name) + "'");
}

struct WindowPolicy {
    WindowMode mode = WindowMode::fixed;
    std::size_t fixed_w = 10;
    std::vector<std::size_t> candidates; // cv / adaptive, strictly increasing
    double p_threshold = 0.01;           // adaptive trigger level

    static WindowPolicy fixed_window(std::size_t w) {
        WindowPolicy p;
        p.mode = WindowMode::fixed;
        p.fixed_w = w;
        return p;
    }
    static WindowPolicy cross_validated(std::vector<std::size_t> candidates) {
        WindowPolicy p;
        p.mode = WindowMode::cv;
        p.candidates = std::move(candidates);
        return p;
    }
    static WindowPolicy adaptive(std::vector<std::size_t> candidates, double p_threshold = 0.01) {
        WindowPolicy p;
        p.mode = WindowMode::adaptive;
        p.candidates = std::move(candidates);
        p.p_threshold = p_threshold;
        return p;
    }

    // Checks the policy against a history capacity T.
    void validate(std::size_t history_capacity) const {
        if (mode == WindowMode::fixed) {
            if (fixed_w < 1 || fixed_w + 2 > history_capacity) {
                throw std::invalid_argument("fixed window " + std::to_string(fixed_w) +
                                            " outside [1, T-2] with T=" +
                                            std::to_string(history_capacity));
            }
            return;
        }
        if (candidates.empty()) throw std::invalid_argument("window candidate list is empty");
        std::size_t prev = 0;
        for (std::size_t w : candidates) {
            if (w < 1 || w + 2 > history_capacity) {
                throw std::invalid_argument("window candidate " + std::to_string(w) +
                                            " outside [1, T-2] with T=" +
                                            std::to_string(history_capacity));
            }
            if (w <= prev) throw std::invalid_argument("window candidates must be strictly increasing");
            prev = w;
        }
        if (mode == WindowMode::adaptive && 2 * candidates.back() > history_capacity) {
            throw std::invalid_argument("adaptive window candidate " +
                                        std::to_string(candidates.back()) + " exceeds T/2 with T=" +
                                        std::to_string(history_capacity));
        }
        if (mode == WindowMode::adaptive && !(p_threshold > 0.0 && p_threshold < 1.0)) {
            throw std::invalid_argument("adaptive p threshold must lie in (0, 1)");
        }
    }
};

// Default candidate list {5, 10, 15, ..., min(100, T/2)}, clipped to the
// admissible range.
inline std::vector<std::size_t> default_window_candidates(std::size_t history_capacity) {
    std::vector<std::size_t> out;
    const std::size_t cap = std::min<std::size_t>(100, history_capacity / 2);
    for (std::size_t w = 5; w <= cap && w + 2 <= history_capacity; w += 5) out.push_back(w);
    if (out.empty() && history_capacity >= 3) {
        out.push_back(std::min(history_capacity - 2, std::max<std::size_t>(1, history_capacity / 2)));
    }
    return out;
}

// Exact two-sample KS statistic D = sup_x |ECDF_a(x) - ECDF_b(x)|, evaluated
// over the merged sample points.
inline double ks_statistic(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("KS statistic of empty sample");
    std::vector<double> sa(a.begin(), a.end());
    std::vector<double> sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const double na = static_cast<double>(sa.size());
    const double nb = static_cast<double>(sb.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < sa.size() || j < sb.size()) {
        const double x = (j == sb.size() || (i < sa.size() && sa[i] <= sb[j])) ? sa[i] : sb[j];
        while (i < sa.size() && sa[i] <= x) ++i;
        while (j < sb.size() && sb[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

// Asymptotic two-sided p-value for the two-sample statistic:
// p = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 z^2), z = D sqrt(na nb / (na + nb)),
// truncated once terms drop below 1e-12 and clamped to [0, 1].
inline double ks_pvalue(double d, std::size_t n_a, std::size_t n_b) {
    if (!(d >= 0.0 && d <= 1.0 + 1e-12)) {
        throw std::invalid_argument("KS statistic " + std::to_string(d) + " outside [0, 1]");
    }
    if (n_a == 0 || n_b == 0) throw std::invalid_argument("KS p-value needs nonempty samples");
    const double na = static_cast<double>(n_a);
    const double nb = static_cast<double>(n_b);
    const double z = d * std::sqrt(na * nb / (na + nb));
    if (!(z > 0.0)) return 1.0;
    double sum = 0.0;
    for (int j = 1; j <= 100000; ++j) {
        const double term = std::exp(-2.0 * static_cast<double>(j) * static_cast<double>(j) * z * z);
        sum += (j % 2 == 1) ? term : -term;
        if (term < 1e-12) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

// Scans candidates ascending and returns the first w whose KS test between
// the two most recent length-w residual blocks rejects at the threshold.
// With no trigger the largest candidate is returned: no detected shift means
// the longest usable memory.
inline std::size_t adaptive_window(const ResidualHistory& history, const WindowPolicy& policy) {
    if (policy.mode != WindowMode::adaptive) {
        throw std::invalid_argument("adaptive_window called with a non-adaptive policy");
    }
    if (policy.candidates.empty()) throw std::invalid_argument("window candidate list is empty");
    const auto& values = history.values();
    for (std::size_t w : policy.candidates) {
        if (2 * w > values.size()) {
            throw std::invalid_argument("adaptive window candidate " + std::to_string(w) +
                                        " exceeds half the stored history (" +
                                        std::to_string(values.size()) + ")");
        }
        std::span<const double> recent(values.data() + values.size() - w, w);
        std::span<const double> previous(values.data() + values.size() - 2 * w, w);
        const double p = ks_pvalue(ks_statistic(recent, previous), w, w);
        if (p < policy.p_threshold) return w;
    }
    return policy.candidates.back();
}

struct CandidateScore {
    double coverage = 0.0;
    double mean_width = 0.0;
};

struct CvSelection {
    std::size_t window = 0;
    std::vector<CandidateScore> scores; // aligned with the candidate list
};

// Cross-validated window choice: among candidates whose validation coverage
// reaches 1 - alpha, the one with the smallest mean width wins; if none
// reaches coverage, the highest-coverage candidate wins. Ties break toward
// the smaller w. `evaluate` runs the full interval pipeline for one
// candidate on the validation split.
inline CvSelection cv_window(const std::vector<std::size_t>& candidates, double alpha,
                             const std::function<CandidateScore(std::size_t)>& evaluate) {
    if (candidates.empty()) throw std::invalid_argument("window candidate list is empty");
    CvSelection sel;
    sel.scores.reserve(candidates.size());
    for (std::size_t w : candidates) sel.scores.push_back(evaluate(w));

    const double target = 1.0 - alpha;
    bool have_covering = false;
    double best_width = 0.0;
    double best_coverage = -1.0;
    std::size_t best_w = candidates.front();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& s = sel.scores[i];
        if (s.coverage >= target) {
            if (!have_covering || s.mean_width < best_width) {
                have_covering = true;
                best_width = s.mean_width;
                best_w = candidates[i];
            }
        } else if (!have_covering && s.coverage > best_coverage) {
            best_coverage = s.coverage;
            best_w = candidates[i];
        }
    }
    sel.window = best_w;
    return sel;
}

} // namespace kowcpi
