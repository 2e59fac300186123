#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kowcpi/errors.hpp"
#include "kowcpi/pipeline.hpp"

// Evaluation harness: coverage/width metrics, split-conformal and adaptive
// conformal baselines, and the multi-seed benchmark runner. Each series run
// follows the 7:1:2 protocol: fit the point predictor on the first split,
// tune window and bandwidth on the second, stream the third through every
// method.

namespace kowcpi {

enum class Method { kowcpi, plain_nw, scp, aci };

inline std::string_view to_string(Method m) {
    switch (m) {
    case Method::kowcpi: return "kowcpi";
    case Method::plain_nw: return "plain-nw";
    case Method::scp: return "scp";
    case Method::aci: return "aci";
    }
    return "unknown";
}

inline Method method_from_string(std::string_view name) {
    if (name == "kowcpi") return Method::kowcpi;
    if (name == "plain-nw" || name == "plain_nw") return Method::plain_nw;
    if (name == "scp") return Method::scp;
    if (name == "aci") return Method::aci;
    throw std::invalid_argument("unknown method '" + std::string(name) + "'");
}

// Rolling coverage RC_t = (1/m) sum_{i=1..m} covered_{t-i+1}, defined for
// t >= m; empty when the series is shorter than m.
inline std::vector<double> rolling_coverage(const std::vector<std::uint8_t>& covered,
                                            std::size_t m) {
    if (m < 1) throw std::invalid_argument("rolling window m must be >= 1");
    if (m > covered.size()) return {};
    std::vector<double> out;
    out.reserve(covered.size() - m + 1);
    double running = 0.0;
    for (std::size_t i = 0; i < covered.size(); ++i) {
        running += covered[i];
        if (i + 1 >= m) {
            out.push_back(running / static_cast<double>(m));
            running -= covered[i + 1 - m];
        }
    }
    return out;
}

struct EvaluationReport {
    std::vector<IntervalResult> per_step;
    double marginal_coverage = 0.0;
    double mean_width = 0.0;
    std::vector<double> rolling;
    std::size_t rolling_m = 0;
};

inline EvaluationReport summarize(std::vector<IntervalResult> per_step, std::size_t rolling_m) {
    EvaluationReport report;
    report.rolling_m = rolling_m;
    std::vector<std::uint8_t> covered;
    covered.reserve(per_step.size());
    double width_sum = 0.0;
    double covered_sum = 0.0;
    for (const auto& r : per_step) {
        width_sum += r.width();
        const bool c = r.covered.value_or(false);
        covered.push_back(c ? 1 : 0);
        covered_sum += c ? 1.0 : 0.0;
    }
    if (!per_step.empty()) {
        report.marginal_coverage = covered_sum / static_cast<double>(per_step.size());
        report.mean_width = width_sum / static_cast<double>(per_step.size());
    }
    report.rolling = rolling_coverage(covered, rolling_m);
    report.per_step = std::move(per_step);
    return report;
}

// Split-conformal radius: the ceil((1-alpha)(n+1))-th smallest absolute
// calibration residual, clamped to the sample when the rank exceeds n.
inline double scp_radius(std::span<const double> calibration_residuals, double alpha) {
    if (calibration_residuals.empty()) {
        throw std::invalid_argument("split conformal needs a nonempty calibration set");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    std::vector<double> abs_resid(calibration_residuals.size());
    for (std::size_t i = 0; i < abs_resid.size(); ++i) {
        abs_resid[i] = std::abs(calibration_residuals[i]);
    }
    std::sort(abs_resid.begin(), abs_resid.end());
    const double n = static_cast<double>(abs_resid.size());
    auto rank = static_cast<std::size_t>(std::ceil((1.0 - alpha) * (n + 1.0)));
    rank = std::clamp<std::size_t>(rank, 1, abs_resid.size());
    return abs_resid[rank - 1];
}

// Fixed symmetric interval f(x) +/- q for the whole test phase.
inline EvaluationReport scp_baseline(std::span<const double> calibration_residuals, double alpha,
                                     std::span<const double> yhat, std::span<const double> y,
                                     long long t0, std::size_t rolling_m) {
    if (yhat.size() != y.size()) throw std::invalid_argument("yhat/y length mismatch");
    const double q = scp_radius(calibration_residuals, alpha);
    std::vector<IntervalResult> steps(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        auto& r = steps[i];
        r.t = t0 + static_cast<long long>(i);
        r.lower = yhat[i] - q;
        r.upper = yhat[i] + q;
        r.covered = (y[i] >= r.lower && y[i] <= r.upper);
    }
    return summarize(std::move(steps), rolling_m);
}

// Adaptive conformal inference: the working level alpha_t moves by
// gamma (alpha - err_t) after each step and the interval uses the empirical
// calibration quantile at level 1 - alpha_t.
inline EvaluationReport aci_baseline(std::span<const double> calibration_residuals, double alpha,
                                     double gamma, std::span<const double> yhat,
                                     std::span<const double> y, long long t0,
                                     std::size_t rolling_m) {
    if (yhat.size() != y.size()) throw std::invalid_argument("yhat/y length mismatch");
    if (!(gamma >= 0.0)) throw std::invalid_argument("ACI gamma must be nonnegative");
    std::vector<double> abs_resid(calibration_residuals.size());
    for (std::size_t i = 0; i < abs_resid.size(); ++i) {
        abs_resid[i] = std::abs(calibration_residuals[i]);
    }
    std::sort(abs_resid.begin(), abs_resid.end());
    const double n = static_cast<double>(abs_resid.size());

    double alpha_t = alpha;
    std::vector<IntervalResult> steps(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        auto rank = static_cast<std::size_t>(std::ceil((1.0 - alpha_t) * (n + 1.0)));
        rank = std::clamp<std::size_t>(rank, 1, abs_resid.size());
        const double q = abs_resid[rank - 1];
        auto& r = steps[i];
        r.t = t0 + static_cast<long long>(i);
        r.lower = yhat[i] - q;
        r.upper = yhat[i] + q;
        const bool covered = (y[i] >= r.lower && y[i] <= r.upper);
        r.covered = covered;
        const double err = covered ? 0.0 : 1.0;
        alpha_t = std::clamp(alpha_t + gamma * (alpha - err), 0.001, 0.999);
    }
    return summarize(std::move(steps), rolling_m);
}

struct RunSpec {
    double alpha = 0.1;
    std::size_t history = 0; // T; 0 = all residuals before the test split
    WindowPolicy window = WindowPolicy::fixed_window(20);
    KernelFamily kernel = KernelFamily::epanechnikov;
    BandwidthPolicy bandwidth{};
    double beta_step = 0.005;
    PredictorSpec predictor{};
    std::size_t rolling_m = 100;
    double aci_gamma = 0.01;
    double train_fraction = 0.7;
    double tune_fraction = 0.1;

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
        if (!(train_fraction > 0.0 && tune_fraction > 0.0 &&
              train_fraction + tune_fraction < 1.0)) {
            throw ConfigError("split fractions must be positive with train + tune < 1");
        }
        if (rolling_m < 1) throw ConfigError("rolling_m must be >= 1");
        if (!(aci_gamma >= 0.0)) throw ConfigError("aci_gamma must be nonnegative");
        try {
            predictor.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
};

struct ResolvedParams {
    std::size_t lags = 0;
    std::size_t history = 0;
    std::size_t window = 0;      // 0 when the window adapts per step
    double bandwidth = 0.0;      // NaN when the bandwidth adapts per step
    std::size_t train_size = 0;
    std::size_t tune_size = 0;
    std::size_t test_size = 0;
    std::vector<std::size_t> cv_candidates;
    std::vector<CandidateScore> cv_scores;
    std::optional<BandwidthSelection> bandwidth_selection;
};

struct SeriesRun {
    std::map<Method, EvaluationReport> reports;
    std::vector<StepDiagnostics> kowcpi_diagnostics;
    ResolvedParams resolved;
};

namespace detail {

inline std::size_t resolve_lags(const RunSpec& spec) {
    if (spec.predictor.lags > 0) return spec.predictor.lags;
    if (spec.window.mode == WindowMode::fixed) return spec.window.fixed_w;
    return 10;
}

} // namespace detail

// Runs one series through the full protocol and the requested methods.
// `preloaded` supplies an externally loaded predictor (kind external);
// otherwise the predictor is fitted on the training split with a stream
// derived from (seed, "predictor").
inline SeriesRun run_series(std::span<const double> y, const RunSpec& spec, std::uint64_t seed,
                            std::span<const Method> methods,
                            std::shared_ptr<const FittedPredictor> preloaded = {}) {
    spec.validate();
    const std::size_t total = y.size();
    const auto n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * total));
    const auto n_tune = static_cast<std::size_t>(std::floor(spec.tune_fraction * total));
    const std::size_t test_start = n_train + n_tune;
    if (test_start + 1 > total) throw ConfigError("series too short for the configured split");

    SeriesRun run;
    run.resolved.train_size = n_train;
    run.resolved.tune_size = n_tune;
    run.resolved.test_size = total - test_start;

    const std::size_t d = detail::resolve_lags(spec);
    run.resolved.lags = d;

    std::shared_ptr<const FittedPredictor> model = preloaded;
    if (!model) {
        if (spec.predictor.kind == PredictorKind::external) {
            throw ConfigError("external predictor table must be loaded before run_series");
        }
        PredictorSpec pspec = spec.predictor;
        pspec.lags = d;
        if (n_train <= d + 10) throw ConfigError("training split too short for the lag count");
        model = std::make_shared<FittedPredictor>(
            fit_predictor(pspec, y.subspan(0, n_train), stream_seed(seed, "predictor")));
    }

    // Point predictions and residuals, defined from the first index with a
    // full lag window. On the training span a forest answers out-of-bag, so
    // the stored residuals are honest rather than shrunk by in-sample fit.
    std::vector<double> yhat(total, 0.0);
    std::vector<double> residuals(total, 0.0);
    const std::size_t first = model->time_indexed() ? 0 : d;
    for (std::size_t t = first; t < total; ++t) {
        if (model->time_indexed()) {
            yhat[t] = model->predict_at(static_cast<long long>(t));
        } else {
            const auto oob =
                t < n_train ? model->oob_prediction_at(t) : std::optional<double>{};
            yhat[t] = oob ? *oob : model->predict(lag_features(y, t, d));
        }
        residuals[t] = y[t] - yhat[t];
    }

    // Default residual buffer: everything observed before the test split,
    // matching the sequential protocol that conditions on all T initial
    // observations. Small buffers degrade coverage through the min-width
    // selection over few atoms.
    std::size_t history = spec.history > 0 ? spec.history : test_start - first;
    if (history < 3) throw ConfigError("resolved history T must be >= 3");
    if (history + first > test_start) {
        throw ConfigError("history T=" + std::to_string(history) +
                          " exceeds the residuals available before the test split");
    }
    run.resolved.history = history;

    // Window resolution.
    WindowPolicy window = spec.window;
    if (window.mode != WindowMode::fixed && window.candidates.empty()) {
        window.candidates = default_window_candidates(history);
        if (window.mode == WindowMode::adaptive) {
            while (!window.candidates.empty() && 2 * window.candidates.back() > history) {
                window.candidates.pop_back();
            }
        }
        if (window.candidates.empty()) {
            throw ConfigError("no admissible window candidates for history T=" +
                              std::to_string(history));
        }
    }
    if (window.mode == WindowMode::cv) {
        const std::size_t tune_start = n_train;
        const std::size_t cv_history = std::min(history, tune_start - first);
        std::vector<std::size_t> candidates;
        for (std::size_t w : window.candidates) {
            if (w + 2 <= cv_history) candidates.push_back(w);
        }
        if (candidates.empty() || n_tune == 0) {
            throw ConfigError("validation split too short to cross-validate the window");
        }
        // Candidate runs use the pilot bandwidth; the final AIC selection
        // happens once on the chosen window.
        auto evaluate = [&](std::size_t w) {
            PipelineConfig cfg;
            cfg.alpha = spec.alpha;
            cfg.history = cv_history;
            cfg.window = WindowPolicy::fixed_window(w);
            cfg.kernel = spec.kernel;
            cfg.bandwidth = BandwidthPolicy::rule_of_thumb();
            cfg.beta_step = spec.beta_step;
            Pipeline pipe(cfg);
            pipe.seed_history(std::span<const double>(residuals).subspan(tune_start - cv_history,
                                                                         cv_history));
            for (std::size_t t = tune_start; t < test_start; ++t) {
                pipe.step_with_prediction(static_cast<long long>(t), yhat[t]);
                pipe.observe(y[t]);
            }
            const auto report = summarize(pipe.results(), 1);
            return CandidateScore{report.marginal_coverage, report.mean_width};
        };
        const auto selection = cv_window(candidates, spec.alpha, evaluate);
        run.resolved.cv_candidates = candidates;
        run.resolved.cv_scores = selection.scores;
        window = WindowPolicy::fixed_window(selection.window);
    }
    run.resolved.window = window.mode == WindowMode::fixed ? window.fixed_w : 0;

    const auto calib =
        std::span<const double>(residuals).subspan(test_start - history, history);
    const auto yhat_test = std::span<const double>(yhat).subspan(test_start);
    const auto y_test = y.subspan(test_start);
    const auto t0 = static_cast<long long>(test_start);

    auto stream_pipeline = [&](WeightScheme scheme, SeriesRun& out, Method method) {
        PipelineConfig cfg;
        cfg.alpha = spec.alpha;
        cfg.history = history;
        cfg.window = window;
        cfg.kernel = spec.kernel;
        cfg.bandwidth = spec.bandwidth;
        cfg.beta_step = spec.beta_step;
        cfg.scheme = scheme;
        Pipeline pipe(cfg);
        pipe.seed_history(calib);
        for (std::size_t i = 0; i < y_test.size(); ++i) {
            pipe.step_with_prediction(t0 + static_cast<long long>(i), yhat_test[i]);
            pipe.observe(y_test[i]);
        }
        if (method == Method::kowcpi) {
            out.kowcpi_diagnostics = pipe.diagnostics();
            if (pipe.bandwidth_selection()) {
                out.resolved.bandwidth_selection = pipe.bandwidth_selection();
                out.resolved.bandwidth = pipe.bandwidth_selection()->spec.bandwidth;
            } else if (!pipe.diagnostics().empty() && window.mode == WindowMode::fixed &&
                       spec.bandwidth.mode != BandwidthPolicy::Mode::aic) {
                out.resolved.bandwidth = pipe.diagnostics().front().bandwidth_used;
            } else {
                out.resolved.bandwidth = std::numeric_limits<double>::quiet_NaN();
            }
        }
        out.reports[method] = summarize(pipe.results(), spec.rolling_m);
    };

    for (Method method : methods) {
        switch (method) {
        case Method::kowcpi:
            stream_pipeline(WeightScheme::rnw, run, method);
            break;
        case Method::plain_nw:
            stream_pipeline(WeightScheme::plain_nw, run, method);
            break;
        case Method::scp:
            run.reports[method] =
                scp_baseline(calib, spec.alpha, yhat_test, y_test, t0, spec.rolling_m);
            break;
        case Method::aci:
            run.reports[method] = aci_baseline(calib, spec.alpha, spec.aci_gamma, yhat_test,
                                               y_test, t0, spec.rolling_m);
            break;
        }
    }
    return run;
}

struct MethodAggregate {
    Method method = Method::kowcpi;
    double coverage_mean = 0.0;
    double coverage_std = 0.0;
    double width_mean = 0.0;
    double width_std = 0.0;
};

struct BenchmarkResult {
    std::vector<std::uint64_t> seeds;
    std::vector<Method> methods;
    std::vector<SeriesRun> runs; // aligned with seeds
    std::vector<MethodAggregate> table;
};

namespace detail {

inline std::pair<double, double> mean_and_population_std(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    return {mean, std::sqrt(std::max(0.0, var))};
}

} // namespace detail

// Runs every seed through run_series (seeds evaluate concurrently; results
// are reduced in seed order) and aggregates coverage and width per method
// with population standard deviations across seeds.
inline BenchmarkResult run_benchmark(
    const std::function<std::vector<double>(std::uint64_t)>& series_source, const RunSpec& spec,
    std::span<const std::uint64_t> seeds, std::span<const Method> methods,
    std::shared_ptr<const FittedPredictor> preloaded = {}, bool parallel = true) {
    if (seeds.empty()) throw ConfigError("benchmark needs at least one seed");
    if (methods.empty()) throw ConfigError("benchmark needs at least one method");

    BenchmarkResult result;
    result.seeds.assign(seeds.begin(), seeds.end());
    result.methods.assign(methods.begin(), methods.end());
    result.runs.resize(seeds.size());

    auto worker = [&](std::size_t i) {
        const auto series = series_source(seeds[i]);
        result.runs[i] = run_series(series, spec, seeds[i], methods, preloaded);
    };
    if (parallel && seeds.size() > 1) {
        std::vector<std::future<void>> futures;
        futures.reserve(seeds.size());
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            futures.push_back(std::async(std::launch::async, worker, i));
        }
        for (auto& f : futures) f.get();
    } else {
        for (std::size_t i = 0; i < seeds.size(); ++i) worker(i);
    }

    for (Method method : methods) {
        std::vector<double> coverages, widths;
        for (const auto& run : result.runs) {
            const auto it = run.reports.find(method);
            if (it == run.reports.end()) continue;
            coverages.push_back(it->second.marginal_coverage);
            widths.push_back(it->second.mean_width);
        }
        const auto [cm, cs] = detail::mean_and_population_std(coverages);
        const auto [wm, ws] = detail::mean_and_population_std(widths);
        result.table.push_back({method, cm, cs, wm, ws});
    }
    return result;
}

} // namespace kowcpi
