#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kowcpi/bandwidth.hpp"
#include "kowcpi/embedding.hpp"
#include "kowcpi/errors.hpp"
#include "kowcpi/predictor.hpp"
#include "kowcpi/rnw.hpp"
#include "kowcpi/window.hpp"

// The sequential interval loop: at each step the residual history is broken
// into overlapping segments, RNW weights are fitted at the query segment,
// the miscoverage budget alpha is split between the tails by grid search,
// and the interval [f(x) + Q_beta*, f(x) + Q_{1-alpha+beta*}] is emitted.
// Observing the realized value pushes a fresh residual and records coverage.

namespace kowcpi {

struct BandwidthPolicy {
    enum class Mode { fixed, rule_of_thumb, aic };

    Mode mode = Mode::aic;
    double fixed_h = 1.0;
    std::size_t grid_size = 15;
    double grid_span = 8.0;
    std::vector<double> explicit_grid; // overrides the default grid when nonempty
    std::size_t reselect_every = 0;    // aic: redo selection every k steps (0 = once at warm-up)

    static BandwidthPolicy fixed(double h) {
        BandwidthPolicy p;
        p.mode = Mode::fixed;
        p.fixed_h = h;
        return p;
    }
    static BandwidthPolicy rule_of_thumb() {
        BandwidthPolicy p;
        p.mode = Mode::rule_of_thumb;
        return p;
    }
    static BandwidthPolicy aic() { return BandwidthPolicy{}; }

    void validate() const {
        if (mode == Mode::fixed && (!(fixed_h > 0.0) || !std::isfinite(fixed_h))) {
            throw ConfigError("bandwidth.fixed_h must be a positive finite real");
        }
        if (mode == Mode::aic && explicit_grid.empty() && grid_size == 0) {
            throw ConfigError("bandwidth.grid_size must be >= 1");
        }
        for (double h : explicit_grid) {
            if (!(h > 0.0) || !std::isfinite(h)) {
                throw ConfigError("bandwidth.grid entries must be positive finite reals");
            }
        }
    }
};

inline std::string_view to_string(BandwidthPolicy::Mode mode) {
    switch (mode) {
    case BandwidthPolicy::Mode::fixed: return "fixed";
    case BandwidthPolicy::Mode::rule_of_thumb: return "rule-of-thumb";
    case BandwidthPolicy::Mode::aic: return "aic";
    }
    return "unknown";
}

inline BandwidthPolicy::Mode bandwidth_mode_from_string(std::string_view name) {
    if (name == "fixed") return BandwidthPolicy::Mode::fixed;
    if (name == "rule-of-thumb" || name == "rule_of_thumb") {
        return BandwidthPolicy::Mode::rule_of_thumb;
    }
    if (name == "aic") return BandwidthPolicy::Mode::aic;
    throw std::invalid_argument("unknown bandwidth mode '" + std::string(name) + "'");
}

struct PipelineConfig {
    double alpha = 0.1;
    std::size_t history = 100; // T, the residual buffer capacity
    WindowPolicy window = WindowPolicy::fixed_window(10);
    KernelFamily kernel = KernelFamily::epanechnikov;
    BandwidthPolicy bandwidth{};
    double beta_step = 0.005;
    WeightScheme scheme = WeightScheme::rnw;

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
        if (!(beta_step > 0.0)) throw ConfigError("beta_step must be positive");
        const double steps = alpha / beta_step;
        if (std::abs(std::llround(steps) * beta_step - alpha) > 1e-12) {
            throw ConfigError("beta_step must divide alpha (within 1e-12)");
        }
        if (history < 3) throw ConfigError("history T must be >= 3");
        bandwidth.validate();
        try {
            window.validate(history);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        if (window.mode != WindowMode::adaptive) {
            const std::size_t w =
                window.mode == WindowMode::fixed ? window.fixed_w : window.candidates.back();
            if (history < w + 2) throw ConfigError("history T must be >= w + 2");
        }
    }
};

struct BetaSearchResult {
    double beta_star = 0.0;
    double lower_quantile = 0.0;
    double upper_quantile = 0.0;
};

// Evaluates width(beta) = Q_{1-alpha+beta} - Q_beta over the grid
// {0, step, 2 step, ..., alpha} and keeps the minimizer; ties break toward
// the smaller beta.
inline BetaSearchResult beta_star_search(const RnwFit& fit, double alpha, double step) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    if (!(step > 0.0)) throw std::invalid_argument("beta grid step must be positive");
    const long long count = std::llround(alpha / step);
    if (count < 1 || std::abs(static_cast<double>(count) * step - alpha) > 1e-12) {
        throw std::invalid_argument("beta grid step must divide alpha");
    }
    BetaSearchResult best;
    double best_width = std::numeric_limits<double>::infinity();
    for (long long i = 0; i <= count; ++i) {
        const double beta = (i == count) ? alpha : static_cast<double>(i) * step;
        const double lo = fit.ecdf.quantile(beta);
        const double hi = fit.ecdf.quantile(1.0 - alpha + beta);
        const double width = hi - lo;
        if (width < best_width) {
            best_width = width;
            best = {beta, lo, hi};
        }
    }
    return best;
}

struct IntervalResult {
    long long t = 0;
    double lower = 0.0;
    double upper = 0.0;
    double beta_star = 0.0;
    double gap = 0.0; // discrete gap diagnostic, max_i W_i
    bool degenerate = false;
    std::optional<bool> covered;

    double width() const { return upper - lower; }
};

struct StepDiagnostics {
    long long t = 0;
    std::size_t window_used = 0;
    double bandwidth_used = 0.0;
};

class Pipeline {
public:
    explicit Pipeline(PipelineConfig config, std::shared_ptr<const FittedPredictor> predictor = {})
        : config_(std::move(config)), predictor_(std::move(predictor)),
          history_(config_.history) {
        config_.validate();
        if (config_.window.mode == WindowMode::cv) {
            throw ConfigError("cv window policy must be resolved to a fixed w before streaming");
        }
    }

    void seed_history(std::span<const double> residuals) {
        for (double r : residuals) history_.push(r);
    }

    void push_residual(double r) { history_.push(r); }

    bool warm() const { return history_.full(); }
    const ResidualHistory& history() const { return history_; }
    const PipelineConfig& config() const { return config_; }

    // Resolved AIC bandwidth selection (empty until the first step in aic
    // mode with a non-adaptive window).
    const std::optional<BandwidthSelection>& bandwidth_selection() const { return selection_; }

    IntervalResult step(long long t, std::span<const double> features) {
        if (!predictor_) throw std::logic_error("pipeline has no point predictor attached");
        return step_with_prediction(t, predictor_->predict(features));
    }

    IntervalResult step_with_prediction(long long t, double yhat) {
        if (!warm()) {
            throw std::logic_error("pipeline cold: history holds " +
                                   std::to_string(history_.size()) + " of " +
                                   std::to_string(history_.capacity()) + " residuals");
        }
        if (pending_) throw std::logic_error("step emitted before previous step was observed");

        const std::size_t w = config_.window.mode == WindowMode::adaptive
                                  ? adaptive_window(history_, config_.window)
                                  : config_.window.fixed_w;
        const double h = resolve_bandwidth(w);
        const auto segments = build_segments(history_, w);
        const auto fit = fit_scheme(segments, KernelSpec{config_.kernel, h}, config_.scheme);
        const auto search = beta_star_search(fit, config_.alpha, config_.beta_step);

        IntervalResult res;
        res.t = t;
        res.lower = yhat + search.lower_quantile;
        res.upper = yhat + search.upper_quantile;
        res.beta_star = search.beta_star;
        res.gap = discrete_gap(fit);
        res.degenerate = fit.degenerate;
        results_.push_back(res);
        diagnostics_.push_back({t, w, h});

        pending_ = true;
        pending_yhat_ = yhat;
        ++steps_;
        return res;
    }

    void observe(double y) {
        if (!pending_) throw std::logic_error("observe without a matching step");
        auto& res = results_.back();
        res.covered = (y >= res.lower && y <= res.upper); // closed interval
        history_.push(y - pending_yhat_);
        pending_ = false;
    }

    const std::vector<IntervalResult>& results() const { return results_; }
    const std::vector<StepDiagnostics>& diagnostics() const { return diagnostics_; }

private:
    double resolve_bandwidth(std::size_t w) {
        switch (config_.bandwidth.mode) {
        case BandwidthPolicy::Mode::fixed:
            return config_.bandwidth.fixed_h;
        case BandwidthPolicy::Mode::rule_of_thumb:
            return rule_of_thumb_bandwidth(history_.values(), w);
        case BandwidthPolicy::Mode::aic:
            break;
        }
        // Adaptive windows change per step, so a once-selected AIC bandwidth
        // has no single w to attach to; fall back to the per-step pilot.
        if (config_.window.mode == WindowMode::adaptive) {
            return rule_of_thumb_bandwidth(history_.values(), w);
        }
        const bool stale = config_.bandwidth.reselect_every > 0 &&
                           steps_ - selected_at_ >= config_.bandwidth.reselect_every;
        if (!selection_ || stale) {
            const auto segments = build_segments(history_, w);
            BandwidthGrid grid;
            if (!config_.bandwidth.explicit_grid.empty()) {
                grid.values = config_.bandwidth.explicit_grid;
                grid.pilot = rule_of_thumb_bandwidth(history_.values(), w);
            } else {
                grid = default_bandwidth_grid(history_.values(), w, config_.bandwidth.grid_size,
                                              config_.bandwidth.grid_span);
            }
            selection_ = select_bandwidth(segments, config_.kernel, grid, config_.scheme);
            selected_at_ = steps_;
        }
        return selection_->spec.bandwidth;
    }

    PipelineConfig config_;
    std::shared_ptr<const FittedPredictor> predictor_;
    ResidualHistory history_;
    std::vector<IntervalResult> results_;
    std::vector<StepDiagnostics> diagnostics_;
    std::optional<BandwidthSelection> selection_;
    std::size_t selected_at_ = 0;
    std::size_t steps_ = 0;
    bool pending_ = false;
    double pending_yhat_ = 0.0;
};

} // namespace kowcpi
