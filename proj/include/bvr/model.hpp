#pragma once

// Rayleigh and bivariate Rayleigh (BVR) distributions.
//
// BVR(l0, l1, l2) is the law of (X, Y) = (min(U0,U1), min(U0,U2)) for
// independent Ui ~ Rayleigh(rate li). The shared shock U0 puts positive
// mass on the diagonal {X = Y}; l0 = 0 gives independent marginals.

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "bvr/rng.hpp"

namespace bvr {

// Rayleigh with survival exp(-theta x^2).
struct RayleighParams {
    double theta{1.0};
};

inline void validate(const RayleighParams& p) {
    if (!(p.theta > 0.0) || !std::isfinite(p.theta))
        throw std::invalid_argument("RayleighParams: theta must be positive and finite");
}

inline double rayleigh_cdf(const RayleighParams& p, double x) {
    validate(p);
    if (x < 0.0 || !std::isfinite(x)) throw std::domain_error("rayleigh_cdf: x must be >= 0");
    return -std::expm1(-p.theta * x * x);
}

inline double rayleigh_survival(const RayleighParams& p, double x) {
    validate(p);
    if (x < 0.0 || !std::isfinite(x)) throw std::domain_error("rayleigh_survival: x must be >= 0");
    return std::exp(-p.theta * x * x);
}

inline double rayleigh_quantile(const RayleighParams& p, double prob) {
    validate(p);
    if (!(prob >= 0.0 && prob < 1.0))
        throw std::domain_error("rayleigh_quantile: probability must lie in [0,1)");
    return std::sqrt(-std::log1p(-prob) / p.theta);
}

inline double rayleigh_sample(const RayleighParams& p, Rng& rng) {
    return rayleigh_quantile(p, rng.uniform());
}

struct BvrParams {
    double lambda0{0.0};  // shared-shock rate, may be zero (independence)
    double lambda1{1.0};
    double lambda2{1.0};

    double total() const { return lambda0 + lambda1 + lambda2; }
};

// Rates must be finite and nonnegative with positive total. Zero lambda1 or
// lambda2 is tolerated at this layer (the corresponding component is never
// the minimum); the likelihood layer imposes its own stricter requirements.
inline void validate(const BvrParams& p) {
    if (!std::isfinite(p.lambda0) || !std::isfinite(p.lambda1) || !std::isfinite(p.lambda2) ||
        p.lambda0 < 0.0 || p.lambda1 < 0.0 || p.lambda2 < 0.0 || !(p.total() > 0.0))
        throw std::invalid_argument("BvrParams: rates must be nonnegative, finite, with positive total");
}

struct PairedObservation {
    double x{};
    double y{};
};

struct PairedSample {
    std::vector<PairedObservation> observations;
    std::size_t n() const { return observations.size(); }
};

inline void validate(const PairedSample& s) {
    if (s.observations.empty()) throw std::invalid_argument("PairedSample: sample is empty");
    for (const auto& o : s.observations)
        if (!(o.x > 0.0) || !(o.y > 0.0) || !std::isfinite(o.x) || !std::isfinite(o.y))
            throw std::invalid_argument("PairedSample: observations must be strictly positive");
}

struct ClassProbabilities {
    double tie{};     // P(X = Y)
    double x_lt_y{};  // P(X < Y)
    double y_lt_x{};  // P(Y < X) = R
};

// R = P(Y < X) = l2 / (l0 + l1 + l2).
inline double reliability(const BvrParams& p) {
    validate(p);
    return p.lambda2 / p.total();
}

inline double joint_survival(const BvrParams& p, double x, double y) {
    validate(p);
    if (x < 0.0 || y < 0.0) throw std::domain_error("joint_survival: coordinates must be >= 0");
    const double m = std::max(x, y);
    return std::exp(-p.lambda1 * x * x - p.lambda2 * y * y - p.lambda0 * m * m);
}

// min(X,Y) is Rayleigh with the total rate.
inline double min_survival(const BvrParams& p, double t) {
    validate(p);
    if (t < 0.0) throw std::domain_error("min_survival: t must be >= 0");
    return std::exp(-p.total() * t * t);
}

// The event X=Y / X<Y / Y<X is decided by which of U0/U1/U2 is smallest,
// so each probability is the corresponding rate over the total.
inline ClassProbabilities class_probabilities(const BvrParams& p) {
    validate(p);
    const double s = p.total();
    return {p.lambda0 / s, p.lambda1 / s, p.lambda2 / s};
}

namespace detail {
// Inverse-cdf draw; rate 0 encodes a component that never fires.
inline double rayleigh_draw(double rate, Rng& rng) {
    const double u = rng.uniform();
    if (rate == 0.0) return std::numeric_limits<double>::infinity();
    return std::sqrt(-std::log1p(-u) / rate);
}
}  // namespace detail

// Exact sampling through the latent (U0, U1, U2) triple. Tied pairs reuse the
// identical U0 value, so ties in synthetic data are bit-exact.
inline PairedSample sample_bvr(const BvrParams& p, std::size_t n, Rng& rng) {
    validate(p);
    if (n == 0) throw std::invalid_argument("sample_bvr: n must be >= 1");
    if (!(p.lambda0 + p.lambda1 > 0.0) || !(p.lambda0 + p.lambda2 > 0.0))
        throw std::invalid_argument("sample_bvr: marginal rates must be positive");
    PairedSample s;
    s.observations.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u0 = detail::rayleigh_draw(p.lambda0, rng);
        const double u1 = detail::rayleigh_draw(p.lambda1, rng);
        const double u2 = detail::rayleigh_draw(p.lambda2, rng);
        s.observations.push_back({std::min(u0, u1), std::min(u0, u2)});
    }
    return s;
}

}  // namespace bvr
