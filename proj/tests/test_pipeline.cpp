#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "kowcpi/pipeline.hpp"
#include "kowcpi/rng.hpp"

using namespace kowcpi;

namespace {

RnwFit fit_of_atoms(std::vector<double> values, std::vector<double> weights) {
    RnwFit fit;
    fit.ecdf = make_weighted_ecdf(values, weights);
    fit.atom_values = std::move(values);
    fit.weights = std::move(weights);
    return fit;
}

RnwFit uniform_fit(std::size_t n) {
    std::vector<double> values(n), weights(n, 1.0 / static_cast<double>(n));
    std::iota(values.begin(), values.end(), 1.0);
    return fit_of_atoms(values, weights);
}

PipelineConfig basic_config(std::size_t history, std::size_t w, double h, double alpha = 0.1) {
    PipelineConfig cfg;
    cfg.alpha = alpha;
    cfg.history = history;
    cfg.window = WindowPolicy::fixed_window(w);
    cfg.bandwidth = BandwidthPolicy::fixed(h);
    return cfg;
}

// Independent enumeration of the beta grid.
BetaSearchResult beta_search_oracle(const RnwFit& fit, double alpha, double step) {
    const auto count = static_cast<long long>(std::llround(alpha / step));
    BetaSearchResult best;
    double best_width = std::numeric_limits<double>::infinity();
    for (long long i = 0; i <= count; ++i) {
        const double beta = (i == count) ? alpha : static_cast<double>(i) * step;
        const double lo = fit.ecdf.quantile(beta);
        const double hi = fit.ecdf.quantile(1.0 - alpha + beta);
        if (hi - lo < best_width) {
            best_width = hi - lo;
            best = {beta, lo, hi};
        }
    }
    return best;
}

} // namespace

TEST_CASE("beta search over uniform atoms 1..10") {
    // alpha = 0.2, step = 0.05: widths (7, 8, 8, 8, 8), so beta* = 0 with
    // quantiles (1, 8).
    const auto fit = uniform_fit(10);
    const auto res = beta_star_search(fit, 0.2, 0.05);
    REQUIRE(res.beta_star == 0.0);
    REQUIRE(res.lower_quantile == 1.0);
    REQUIRE(res.upper_quantile == 8.0);

    const double widths[] = {7, 8, 8, 8, 8};
    const double betas[] = {0.0, 0.05, 0.1, 0.15, 0.2};
    for (int i = 0; i < 5; ++i) {
        const double lo = fit.ecdf.quantile(betas[i]);
        const double hi = fit.ecdf.quantile(1.0 - 0.2 + betas[i]);
        REQUIRE(hi - lo == widths[i]);
    }
}

TEST_CASE("beta search finds interior minima and matches the grid oracle") {
    Rng rng(139);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 5 + rng.uniform_index(40);
        std::vector<double> values(n), weights(n);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            values[i] = rng.normal();
            // Unimodal-ish weights with a random center.
            const double center = static_cast<double>(n) * 0.5;
            const double z = (static_cast<double>(i) - center) / (0.3 * static_cast<double>(n));
            weights[i] = std::exp(-0.5 * z * z) + 0.01;
            total += weights[i];
        }
        for (auto& w : weights) w /= total;
        const auto fit = fit_of_atoms(values, weights);
        const double alpha = 0.1;
        const double step = 0.005;
        const auto got = beta_star_search(fit, alpha, step);
        const auto expected = beta_search_oracle(fit, alpha, step);
        REQUIRE(got.beta_star == expected.beta_star);
        REQUIRE(got.lower_quantile == expected.lower_quantile);
        REQUIRE(got.upper_quantile == expected.upper_quantile);
    }
}

TEST_CASE("alpha equal to the step leaves two candidates") {
    const auto fit = uniform_fit(10);
    const auto res = beta_star_search(fit, 0.1, 0.1);
    const double w0 = fit.ecdf.quantile(0.9) - fit.ecdf.quantile(0.0);
    const double w1 = fit.ecdf.quantile(1.0) - fit.ecdf.quantile(0.1);
    REQUIRE(res.upper_quantile - res.lower_quantile == std::min(w0, w1));
}

TEST_CASE("step size must divide alpha") {
    const auto fit = uniform_fit(10);
    REQUIRE_THROWS_AS(beta_star_search(fit, 0.1, 0.03), std::invalid_argument);
}

TEST_CASE("constant residuals give a zero-width interval at the prediction offset") {
    auto cfg = basic_config(20, 3, 1.0);
    Pipeline pipe(cfg);
    pipe.seed_history(std::vector<double>(20, 2.0));
    const auto res = pipe.step_with_prediction(100, 5.0);
    REQUIRE(res.lower == Catch::Approx(7.0).margin(1e-12));
    REQUIRE(res.upper == Catch::Approx(7.0).margin(1e-12));
    REQUIRE(res.width() == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("uniform-kernel limit reproduces empirical-quantile intervals") {
    Rng rng(149);
    const std::size_t T = 200;
    PipelineConfig cfg = basic_config(T, 4, 1e9, 0.1); // boxcar-wide support
    cfg.kernel = KernelFamily::boxcar;
    Pipeline pipe(cfg);
    std::vector<double> residuals(T);
    for (auto& r : residuals) r = rng.uniform01();
    pipe.seed_history(residuals);
    const auto res = pipe.step_with_prediction(0, 0.0);

    // Oracle: with uniform weights the quantiles are plain order statistics,
    // so enumerate the same beta grid over the sorted stored residuals.
    const auto segments = build_segments(pipe.history(), 4);
    std::vector<double> atoms = segments.responses;
    std::sort(atoms.begin(), atoms.end());
    const auto n = static_cast<double>(atoms.size());
    const auto order_stat = [&](double beta) {
        if (beta <= 0.0) return atoms.front();
        const auto rank = static_cast<std::size_t>(std::ceil(beta * n - 1e-9));
        return atoms[std::min(atoms.size() - 1, rank == 0 ? 0 : rank - 1)];
    };
    double best_width = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 20; ++i) {
        const double beta = 0.005 * i;
        const double width = order_stat(0.9 + beta) - order_stat(beta);
        best_width = std::min(best_width, width);
    }
    double max_gap = 0.0;
    for (std::size_t i = 1; i < atoms.size(); ++i) {
        max_gap = std::max(max_gap, atoms[i] - atoms[i - 1]);
    }
    REQUIRE(std::abs(res.width() - best_width) <= max_gap + 1e-12);
    // Width close to the central 90% range of a uniform sample.
    REQUIRE(res.width() > 0.75);
    REQUIRE(res.width() < 1.0);
}

TEST_CASE("no kernel support propagates the degenerate flag") {
    std::vector<double> residuals(30);
    for (std::size_t i = 0; i < residuals.size(); ++i) residuals[i] = static_cast<double>(i);
    auto cfg = basic_config(30, 2, 1e-6);
    Pipeline pipe(cfg);
    pipe.seed_history(residuals);
    const auto res = pipe.step_with_prediction(0, 0.0);
    REQUIRE(res.degenerate);
    REQUIRE(res.gap == Catch::Approx(1.0 / 28.0).margin(1e-12));
}

TEST_CASE("observe marks coverage with closed endpoints and keeps T fixed") {
    auto cfg = basic_config(12, 2, 5.0, 0.2);
    Pipeline pipe(cfg);
    Rng rng(151);
    std::vector<double> seed(12);
    for (auto& v : seed) v = rng.normal();
    pipe.seed_history(seed);

    auto res = pipe.step_with_prediction(0, 1.0);
    pipe.observe(res.upper); // boundary value counts as covered
    REQUIRE(pipe.results().back().covered.value());
    REQUIRE(pipe.history().size() == 12);

    res = pipe.step_with_prediction(1, 1.0);
    pipe.observe(res.upper + 1.0);
    REQUIRE_FALSE(pipe.results().back().covered.value());
    REQUIRE(pipe.history().size() == 12);

    res = pipe.step_with_prediction(2, 1.0);
    pipe.observe(res.lower);
    REQUIRE(pipe.results().back().covered.value());
}

TEST_CASE("interval endpoints are residual atoms shifted by the prediction") {
    Rng rng(157);
    auto cfg = basic_config(40, 3, 2.0);
    Pipeline pipe(cfg);
    std::vector<double> seed(40);
    for (auto& v : seed) v = rng.normal();
    pipe.seed_history(seed);
    const double yhat = 3.7;
    const auto res = pipe.step_with_prediction(0, yhat);
    const auto segments = build_segments(pipe.history(), 3);
    // (yhat + q) - yhat only recovers the atom up to a rounding ulp.
    const auto is_atom = [&](double v) {
        return std::any_of(segments.responses.begin(), segments.responses.end(),
                           [&](double a) { return std::abs(a - v) <= 1e-12; });
    };
    REQUIRE(is_atom(res.lower - yhat));
    REQUIRE(is_atom(res.upper - yhat));
}

TEST_CASE("width is monotone nonincreasing in alpha") {
    Rng rng(163);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> seed(60);
        for (auto& v : seed) v = rng.normal();
        const double widths[2] = {
            [&] {
                Pipeline pipe(basic_config(60, 3, 1.5, 0.05));
                pipe.seed_history(seed);
                return pipe.step_with_prediction(0, 0.0).width();
            }(),
            [&] {
                Pipeline pipe(basic_config(60, 3, 1.5, 0.20));
                pipe.seed_history(seed);
                return pipe.step_with_prediction(0, 0.0).width();
            }(),
        };
        REQUIRE(widths[0] >= widths[1]);
    }
}

TEST_CASE("state machine enforces strict step/observe alternation") {
    auto cfg = basic_config(10, 2, 1.0);
    Pipeline pipe(cfg);
    REQUIRE_THROWS_AS(pipe.step_with_prediction(0, 0.0), std::logic_error); // cold
    pipe.seed_history(std::vector<double>(10, 0.5));
    REQUIRE_THROWS_AS(pipe.observe(1.0), std::logic_error); // no pending step
    pipe.step_with_prediction(0, 0.0);
    REQUIRE_THROWS_AS(pipe.step_with_prediction(1, 0.0), std::logic_error);
    pipe.observe(1.0);
    REQUIRE_NOTHROW(pipe.step_with_prediction(1, 0.0));
}

TEST_CASE("same-seed replay of a whole run is bit-identical") {
    auto run_once = [](std::uint64_t seed) {
        Rng rng(seed);
        Pipeline pipe(basic_config(50, 4, 1.0));
        std::vector<double> warm(50);
        for (auto& v : warm) v = rng.normal();
        pipe.seed_history(warm);
        std::vector<double> bounds;
        for (int t = 0; t < 40; ++t) {
            const double yhat = rng.normal();
            const auto res = pipe.step_with_prediction(t, yhat);
            pipe.observe(yhat + rng.normal());
            bounds.push_back(res.lower);
            bounds.push_back(res.upper);
            bounds.push_back(res.beta_star);
            bounds.push_back(res.gap);
        }
        return bounds;
    };
    REQUIRE(run_once(999) == run_once(999));
}

TEST_CASE("adaptive window policy resolves a window each step") {
    Rng rng(167);
    PipelineConfig cfg;
    cfg.alpha = 0.1;
    cfg.history = 80;
    cfg.window = WindowPolicy::adaptive({5, 10, 20, 40}, 0.01);
    cfg.bandwidth = BandwidthPolicy::rule_of_thumb();
    Pipeline pipe(cfg);
    std::vector<double> warm(80);
    for (auto& v : warm) v = rng.normal();
    pipe.seed_history(warm);
    for (int t = 0; t < 10; ++t) {
        pipe.step_with_prediction(t, 0.0);
        pipe.observe(rng.normal());
    }
    REQUIRE(pipe.diagnostics().size() == 10);
    for (const auto& d : pipe.diagnostics()) {
        REQUIRE((d.window_used == 5 || d.window_used == 10 || d.window_used == 20 ||
                 d.window_used == 40));
        REQUIRE(d.bandwidth_used > 0.0);
    }
}

TEST_CASE("aic bandwidth policy selects once at warm-up") {
    Rng rng(173);
    PipelineConfig cfg;
    cfg.alpha = 0.1;
    cfg.history = 60;
    cfg.window = WindowPolicy::fixed_window(5);
    cfg.bandwidth = BandwidthPolicy::aic();
    Pipeline pipe(cfg);
    std::vector<double> warm(60);
    for (auto& v : warm) v = rng.normal();
    pipe.seed_history(warm);
    pipe.step_with_prediction(0, 0.0);
    pipe.observe(rng.normal());
    REQUIRE(pipe.bandwidth_selection().has_value());
    const double h0 = pipe.diagnostics().front().bandwidth_used;
    pipe.step_with_prediction(1, 0.0);
    pipe.observe(rng.normal());
    REQUIRE(pipe.diagnostics().back().bandwidth_used == h0);
}

TEST_CASE("config validation rejects incoherent settings") {
    PipelineConfig cfg = basic_config(10, 2, 1.0);
    cfg.alpha = 0.0;
    REQUIRE_THROWS_AS(Pipeline(cfg), ConfigError);
    cfg = basic_config(10, 2, 1.0);
    cfg.beta_step = 0.03; // does not divide 0.1
    REQUIRE_THROWS_AS(Pipeline(cfg), ConfigError);
    cfg = basic_config(10, 9, 1.0); // w > T - 2
    REQUIRE_THROWS_AS(Pipeline(cfg), ConfigError);
    cfg = basic_config(10, 2, 1.0);
    cfg.window = WindowPolicy::cross_validated({2, 4});
    REQUIRE_THROWS_AS(Pipeline(cfg), ConfigError); // cv must be resolved upstream
}
