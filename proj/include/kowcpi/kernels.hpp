#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace kowcpi {

// Radial kernel families K(u) = k(||u||). Profiles are the textbook
// univariate forms without any multivariate normalizing constant; every
// downstream weight is invariant to positive rescaling of the kernel.
enum class KernelFamily {
    epanechnikov, // k(t) = 3/4 (1 - t^2) on [0, 1]
    gaussian,     // k(t) = phi(t) truncated at radius 3
    boxcar,       // k(t) = 1/2 on [0, 1]
};

inline constexpr double gaussian_truncation_radius = 3.0;

inline std::string_view to_string(KernelFamily family) {
    switch (family) {
    case KernelFamily::epanechnikov: return "epanechnikov";
    case KernelFamily::gaussian: return "gaussian";
    case KernelFamily::boxcar: return "boxcar";
    }
    return "unknown";
}

inline KernelFamily kernel_family_from_string(std::string_view name) {
    if (name == "epanechnikov") return KernelFamily::epanechnikov;
    if (name == "gaussian") return KernelFamily::gaussian;
    if (name == "boxcar") return KernelFamily::boxcar;
    throw std::invalid_argument("unknown kernel family '" + std::string(name) +
                                "' (expected epanechnikov, gaussian, or boxcar)");
}

struct KernelSpec {
    KernelFamily family = KernelFamily::epanechnikov;
    double bandwidth = 1.0;

    void validate() const {
        if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
            throw std::invalid_argument("kernel bandwidth must be a positive finite real, got " +
                                        std::to_string(bandwidth));
        }
    }
};

// Profile value k(t) at scaled radius t >= 0.
inline double kernel_profile(KernelFamily family, double t) {
    switch (family) {
    case KernelFamily::epanechnikov:
        return t <= 1.0 ? 0.75 * (1.0 - t * t) : 0.0;
    case KernelFamily::gaussian:
        return t <= gaussian_truncation_radius
                   ? std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi)
                   : 0.0;
    case KernelFamily::boxcar:
        return t <= 1.0 ? 0.5 : 0.0;
    }
    return 0.0;
}

// Scaled kernel K_h(u) = h^{-dim} k(||u||_2 / h). `dim` is the configured
// segment length; a vector of any other length is rejected.
inline double eval_kernel(const KernelSpec& spec, std::span<const double> u, std::size_t dim) {
    spec.validate();
    if (u.size() != dim) {
        throw std::invalid_argument("kernel input dimension mismatch: expected " +
                                    std::to_string(dim) + ", got " + std::to_string(u.size()));
    }
    double sq = 0.0;
    for (double v : u) sq += v * v;
    const double radius = std::sqrt(sq);
    return std::pow(spec.bandwidth, -static_cast<double>(dim)) *
           kernel_profile(spec.family, radius / spec.bandwidth);
}

inline double eval_kernel(const KernelSpec& spec, std::span<const double> u) {
    return eval_kernel(spec, u, u.size());
}

} // namespace kowcpi
