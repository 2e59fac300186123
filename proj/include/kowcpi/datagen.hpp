#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kowcpi/rng.hpp"

// Seeded synthetic generators: a heteroskedastic AR/GARCH mixture, a
// nonstationary seasonal model driven by 100 lagged values, and a plain
// AR(1) sanity generator. The recursion cores take injectable noise sources
// so tests can run them noiseless.

namespace kowcpi {

enum class GeneratorKind { hetero_mixture, nonstationary_seasonal, ar1 };

inline std::string_view to_string(GeneratorKind kind) {
    switch (kind) {
    case GeneratorKind::hetero_mixture: return "hetero-mixture";
    case GeneratorKind::nonstationary_seasonal: return "nonstationary-seasonal";
    case GeneratorKind::ar1: return "ar1";
    }
    return "unknown";
}

inline GeneratorKind generator_kind_from_string(std::string_view name) {
    if (name == "hetero-mixture") return GeneratorKind::hetero_mixture;
    if (name == "nonstationary-seasonal") return GeneratorKind::nonstationary_seasonal;
    if (name == "ar1") return GeneratorKind::ar1;
    throw std::invalid_argument("unknown generator kind '" + std::string(name) + "'");
}

struct GeneratorSpec {
    GeneratorKind kind = GeneratorKind::ar1;
    std::size_t length = 1000;
    std::uint64_t seed = 1;
    std::size_t burn_in = 200;
    double phi = 0.8;   // ar1 only
    double sigma = 1.0; // ar1 only

    void validate() const {
        if (length == 0) throw std::invalid_argument("generator length must be positive");
        if (kind == GeneratorKind::ar1 && !(sigma >= 0.0)) {
            throw std::invalid_argument("ar1 sigma must be nonnegative");
        }
    }
};

inline constexpr std::size_t seasonal_lag_depth = 100;

using NoiseSource = std::function<double()>;

// Conditional-variance recursion of the heteroskedastic mixture:
// sigma_t^2 = 0.1 + 0.3 y_{t-1}^2 + 0.6 sigma_{t-1}^2. Always >= 0.1.
inline double hetero_variance_step(double prev_variance, double prev_y) {
    return 0.1 + 0.3 * prev_y * prev_y + 0.6 * prev_variance;
}

// y_t = 0.8 y_{t-1} + sigma_t eps_t + xi_t, started at y_0 = 0 and
// sigma_0^2 = 0.1; the first `burn_in` values are discarded.
inline std::vector<double> hetero_path(std::size_t length, std::size_t burn_in,
                                       const NoiseSource& eps, const NoiseSource& xi,
                                       double y0 = 0.0, double variance0 = 0.1) {
    std::vector<double> out;
    out.reserve(length);
    double y = y0;
    double variance = variance0;
    const std::size_t total = burn_in + length;
    for (std::size_t t = 0; t < total; ++t) {
        variance = hetero_variance_step(variance, y);
        y = 0.8 * y + std::sqrt(variance) * eps() + xi();
        if (t >= burn_in) out.push_back(y);
    }
    return out;
}

// Seasonal envelope log(t') sin(2 pi t' / 12) with t' = mod(t, 12); t' = 0 is
// treated as 12 to keep the 12-cycle continuous.
inline double seasonal_factor(std::size_t t) {
    std::size_t tp = t % 12;
    if (tp == 0) tp = 12;
    return std::log(static_cast<double>(tp)) *
           std::sin(2.0 * std::numbers::pi * static_cast<double>(tp) / 12.0);
}

// y_t = seasonal_factor(t) (|b'X_t| + |b'X_t|^2 + |b'X_t|^3)^{1/4} + e_t with
// X_t the previous 100 values (oldest first) and AR(1) noise
// e_t = 0.6 e_{t-1} + xi_t. The first 100 steps, before lags exist, carry
// the noise alone; they are expected to fall inside the burn-in.
inline std::vector<double> seasonal_path(std::size_t length, std::size_t burn_in,
                                         std::span<const double> beta, const NoiseSource& xi) {
    if (beta.size() != seasonal_lag_depth) {
        throw std::invalid_argument("seasonal beta must have " +
                                    std::to_string(seasonal_lag_depth) + " coefficients");
    }
    const std::size_t total = burn_in + length;
    std::vector<double> series;
    series.reserve(total);
    double noise = 0.0;
    for (std::size_t s = 0; s < total; ++s) {
        noise = 0.6 * noise + xi();
        double y = noise;
        if (s >= seasonal_lag_depth) {
            double dot = 0.0;
            for (std::size_t j = 0; j < seasonal_lag_depth; ++j) {
                dot += beta[j] * series[s - seasonal_lag_depth + j];
            }
            const double u = std::abs(dot);
            y += seasonal_factor(s + 1) * std::pow(u + u * u + u * u * u, 0.25);
        }
        series.push_back(y);
    }
    return {series.begin() + static_cast<std::ptrdiff_t>(burn_in), series.end()};
}

inline std::vector<double> ar1_path(std::size_t length, std::size_t burn_in, double phi,
                                    double sigma, const NoiseSource& eps, double y0 = 0.0) {
    std::vector<double> out;
    out.reserve(length);
    double y = y0;
    const std::size_t total = burn_in + length;
    for (std::size_t t = 0; t < total; ++t) {
        y = phi * y + sigma * eps();
        if (t >= burn_in) out.push_back(y);
    }
    return out;
}

// Feature coefficients of the seasonal model, drawn once per seed as
// N(0, 1)/sqrt(100) to normalize the 100-lag inner product scale.
inline std::vector<double> seasonal_beta(std::uint64_t seed) {
    Rng rng = Rng::stream(seed, "seasonal-beta");
    std::vector<double> beta(seasonal_lag_depth);
    for (double& b : beta) b = rng.normal() * 0.1;
    return beta;
}

inline std::vector<double> generate_hetero(const GeneratorSpec& spec) {
    spec.validate();
    Rng eps = Rng::stream(spec.seed, "hetero-eps");
    Rng xi = Rng::stream(spec.seed, "hetero-xi");
    return hetero_path(
        spec.length, spec.burn_in, [&] { return eps.normal(); },
        [&] { return xi.normal(0.0, 0.1); });
}

inline std::vector<double> generate_seasonal(const GeneratorSpec& spec) {
    spec.validate();
    const auto beta = seasonal_beta(spec.seed);
    Rng xi = Rng::stream(spec.seed, "seasonal-xi");
    return seasonal_path(spec.length, spec.burn_in, beta, [&] { return xi.normal(); });
}

inline std::vector<double> generate_ar1(const GeneratorSpec& spec) {
    spec.validate();
    Rng eps = Rng::stream(spec.seed, "ar1-eps");
    return ar1_path(spec.length, spec.burn_in, spec.phi, spec.sigma, [&] { return eps.normal(); });
}

inline std::vector<double> generate(const GeneratorSpec& spec) {
    switch (spec.kind) {
    case GeneratorKind::hetero_mixture: return generate_hetero(spec);
    case GeneratorKind::nonstationary_seasonal: return generate_seasonal(spec);
    case GeneratorKind::ar1: return generate_ar1(spec);
    }
    throw std::invalid_argument("unknown generator kind");
}

} // namespace kowcpi
