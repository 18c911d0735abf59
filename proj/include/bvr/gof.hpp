#pragma once

// Marginal Rayleigh fitting and the one-sample Kolmogorov-Smirnov test.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "bvr/math.hpp"
#include "bvr/model.hpp"

namespace bvr {

// Closed-form maximizer theta_hat = n / sum(x^2).
inline RayleighParams fit_rayleigh(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("fit_rayleigh: empty sample");
    double sum2 = 0.0;
    for (double x : xs) {
        if (!(x > 0.0) || !std::isfinite(x))
            throw std::invalid_argument("fit_rayleigh: values must be strictly positive");
        sum2 += x * x;
    }
    return {static_cast<double>(xs.size()) / sum2};
}

struct KsResult {
    double statistic{};  // D
    double p_value{};
    std::size_t n{};
    RayleighParams theta_hat{};
};

// Two-sided one-sample KS distance against the Rayleigh cdf, with the
// p-value from the asymptotic Kolmogorov distribution at sqrt(n) D.
// No estimated-parameter (Lilliefors-type) correction is applied; with
// theta estimated from the same data the p-value is conservative.
inline KsResult ks_test(std::span<const double> xs, const RayleighParams& theta) {
    validate(theta);
    if (xs.empty()) throw std::invalid_argument("ks_test: empty sample");
    std::vector<double> sorted(xs.begin(), xs.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double d_plus = 0.0, d_minus = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = rayleigh_cdf(theta, sorted[i]);
        d_plus = std::max(d_plus, static_cast<double>(i + 1) / n - f);
        d_minus = std::max(d_minus, f - static_cast<double>(i) / n);
    }
    KsResult r;
    r.statistic = std::max(d_plus, d_minus);
    r.p_value = kolmogorov_sf(std::sqrt(n) * r.statistic);
    r.n = sorted.size();
    r.theta_hat = theta;
    return r;
}

inline KsResult ks_test(std::span<const double> xs) { return ks_test(xs, fit_rayleigh(xs)); }

}  // namespace bvr
