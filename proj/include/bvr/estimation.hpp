#pragma once

// Likelihood, score, ML fitting (full and R-restricted), expected Fisher
// information and the delta-method variance of the reliability estimate.
//
// The log-likelihood splits the sample into three classes (ties x=y, x<y,
// y<x) because the diagonal carries a singular component. It is concave in
// the rates, so a damped Newton iteration on the score converges globally;
// samples with an empty class have their maximum on a face of the parameter
// cone and are handled by closed forms.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bvr/math.hpp"
#include "bvr/model.hpp"

namespace bvr {

struct ClassCounts {
    std::size_t n0{};  // ties x = y
    std::size_t n1{};  // x < y
    std::size_t n2{};  // y < x
    std::vector<std::size_t> tied_indices;
    std::size_t n() const { return n0 + n1 + n2; }
};

// Partition by |x-y| <= tie_tolerance, else by sign of x-y. The default
// tolerance 0 means exact equality, which is sound for synthetic data
// (ties reuse one draw) and for integer-valued recordings.
inline ClassCounts classify(const PairedSample& sample, double tie_tolerance = 0.0) {
    validate(sample);
    if (!(tie_tolerance >= 0.0)) throw std::invalid_argument("classify: tie_tolerance must be >= 0");
    ClassCounts c;
    for (std::size_t i = 0; i < sample.observations.size(); ++i) {
        const auto& o = sample.observations[i];
        if (std::fabs(o.x - o.y) <= tie_tolerance) {
            ++c.n0;
            c.tied_indices.push_back(i);
        } else if (o.x < o.y) {
            ++c.n1;
        } else {
            ++c.n2;
        }
    }
    return c;
}

namespace detail {

// Sufficient statistics of the three-class likelihood.
struct SuffStats {
    std::size_t n{}, n0{}, n1{}, n2{};
    double sum_x2{}, sum_y2{}, sum_max2{}, sum_min2{};
    double log_const{};  // sum(log x + log y) - sum_{tied} log(max)
};

inline SuffStats suff_stats(const PairedSample& sample, double tie_tolerance = 0.0) {
    validate(sample);
    SuffStats s;
    s.n = sample.observations.size();
    for (const auto& o : sample.observations) {
        const double m = std::max(o.x, o.y);
        const double mn = std::min(o.x, o.y);
        s.sum_x2 += o.x * o.x;
        s.sum_y2 += o.y * o.y;
        s.sum_max2 += m * m;
        s.sum_min2 += mn * mn;
        s.log_const += std::log(o.x) + std::log(o.y);
        if (std::fabs(o.x - o.y) <= tie_tolerance) {
            ++s.n0;
            s.log_const -= std::log(m);
        } else if (o.x < o.y) {
            ++s.n1;
        } else {
            ++s.n2;
        }
    }
    return s;
}

constexpr double kLog2 = 0.6931471805599453;

// Value of the log-likelihood from sufficient statistics. Returns -inf when
// a rate needed by a nonzero count is nonpositive.
inline double loglik(const BvrParams& p, const SuffStats& s) {
    const double neg_inf = -std::numeric_limits<double>::infinity();
    double ll = static_cast<double>(2 * s.n - s.n0) * kLog2 + s.log_const;
    ll += -p.lambda1 * s.sum_x2 - p.lambda2 * s.sum_y2 - p.lambda0 * s.sum_max2;
    if (s.n0 > 0) { if (!(p.lambda0 > 0.0)) return neg_inf; ll += s.n0 * std::log(p.lambda0); }
    if (s.n1 > 0) { if (!(p.lambda1 > 0.0)) return neg_inf; ll += s.n1 * std::log(p.lambda1); }
    if (s.n2 > 0) { if (!(p.lambda2 > 0.0)) return neg_inf; ll += s.n2 * std::log(p.lambda2); }
    if (s.n1 > 0) {
        const double t = p.lambda2 + p.lambda0;
        if (!(t > 0.0)) return neg_inf;
        ll += s.n1 * std::log(t);
    }
    if (s.n2 > 0) {
        const double t = p.lambda1 + p.lambda0;
        if (!(t > 0.0)) return neg_inf;
        ll += s.n2 * std::log(t);
    }
    return ll;
}

inline Vec3 score_from_stats(const BvrParams& p, const SuffStats& s) {
    return {s.n0 / p.lambda0 + s.n2 / (p.lambda1 + p.lambda0) + s.n1 / (p.lambda2 + p.lambda0) -
                s.sum_max2,
            s.n1 / p.lambda1 + s.n2 / (p.lambda1 + p.lambda0) - s.sum_x2,
            s.n2 / p.lambda2 + s.n1 / (p.lambda2 + p.lambda0) - s.sum_y2};
}

// Observed Hessian of the log-likelihood; depends on the data only through
// the class counts.
inline Mat3 hessian_from_stats(const BvrParams& p, const SuffStats& s) {
    const double a = s.n2 / ((p.lambda1 + p.lambda0) * (p.lambda1 + p.lambda0));
    const double b = s.n1 / ((p.lambda2 + p.lambda0) * (p.lambda2 + p.lambda0));
    Mat3 h;
    h(0, 0) = -(s.n0 / (p.lambda0 * p.lambda0)) - a - b;
    h(1, 1) = -(s.n1 / (p.lambda1 * p.lambda1)) - a;
    h(2, 2) = -(s.n2 / (p.lambda2 * p.lambda2)) - b;
    h(0, 1) = h(1, 0) = -a;
    h(0, 2) = h(2, 0) = -b;
    h(1, 2) = h(2, 1) = 0.0;
    return h;
}

}  // namespace detail

inline double log_likelihood(const BvrParams& params, const PairedSample& sample) {
    validate(params);
    return detail::loglik(params, detail::suff_stats(sample));
}

// Left-hand sides of the three score equations.
inline Vec3 score(const BvrParams& params, const PairedSample& sample) {
    if (!(params.lambda0 > 0.0) || !(params.lambda1 > 0.0) || !(params.lambda2 > 0.0))
        throw std::invalid_argument("score: all rates must be strictly positive");
    return detail::score_from_stats(params, detail::suff_stats(sample));
}

// Expected class counts (E[N0], E[N1], E[N2]); equal to n times the class
// probabilities, written here in the phi form so the simplification can be
// checked against the direct rates.
inline Vec3 expected_class_counts(const BvrParams& params, double n) {
    validate(params);
    const double s = params.total();
    const double phi1 = params.lambda2 / s;
    const double phi2 = params.lambda1 / s;
    return {(1.0 - (phi1 + phi2)) * n,
            params.lambda1 / (params.lambda1 + params.lambda0) * (1.0 - phi1) * n,
            params.lambda2 / (params.lambda2 + params.lambda0) * (1.0 - phi2) * n};
}

struct InformationMatrix {
    Mat3 entries;          // I(lambda) for a sample of size n
    Mat3 per_observation;  // J(lambda) = I(lambda) / n
};

// Expected Fisher information; the (lambda1, lambda2) entry is identically 0.
inline InformationMatrix fisher_information(const BvrParams& params, double n) {
    if (!(params.lambda0 > 0.0) || !(params.lambda1 > 0.0) || !(params.lambda2 > 0.0))
        throw std::invalid_argument("fisher_information: all rates must be strictly positive");
    if (!(n > 0.0)) throw std::invalid_argument("fisher_information: n must be positive");
    const double l0 = params.lambda0, l1 = params.lambda1, l2 = params.lambda2;
    const double s = params.total();
    const double phi1 = l2 / s, phi2 = l1 / s;
    const double a = phi1 / ((l1 + l0) * (l1 + l0));
    const double b = phi2 / ((l2 + l0) * (l2 + l0));
    Mat3 j;
    j(0, 0) = (1.0 - (phi1 + phi2)) / (l0 * l0) + a + b;
    j(1, 1) = (1.0 - phi1) / (l1 * (l1 + l0)) + a;
    j(2, 2) = (1.0 - phi2) / (l2 * (l2 + l0)) + b;
    j(0, 1) = j(1, 0) = a;
    j(0, 2) = j(2, 0) = b;
    j(1, 2) = j(2, 1) = 0.0;
    InformationMatrix im;
    im.per_observation = j;
    im.entries = j * n;
    return im;
}

struct DeltaVariance {
    Vec3 gradient{};   // B = dR/dlambda
    Mat3 covariance;   // asymptotic covariance of lambda_hat (I^-1)
    double sigma{};    // B^T covariance B
};

inline Vec3 reliability_gradient(const BvrParams& params) {
    const double s = params.total();
    return {-params.lambda2 / (s * s), -params.lambda2 / (s * s),
            (params.lambda0 + params.lambda1) / (s * s)};
}

inline DeltaVariance delta_variance(const BvrParams& params, double n) {
    const auto info = fisher_information(params, n);
    DeltaVariance d;
    d.gradient = reliability_gradient(params);
    double min_pivot = 0.0;
    try {
        d.covariance = spd_inverse3(info.entries, &min_pivot);
    } catch (const std::runtime_error&) {
        throw std::runtime_error("delta_variance: information matrix is singular (min pivot " +
                                 std::to_string(min_pivot) + ")");
    }
    d.sigma = dot3(d.gradient, mat3_vec(d.covariance, d.gradient));
    return d;
}

// Fraction of observations with y < x; binomial(n, R) numerator.
inline double natural_estimate(const PairedSample& sample) {
    const auto c = classify(sample);
    return static_cast<double>(c.n2) / static_cast<double>(c.n());
}

struct SolverOptions {
    double score_tol{1e-10};
    int max_iterations{200};
    double tie_tolerance{0.0};
};

enum class FitStatus {
    ok,                     // interior MLE, all classes observed
    boundary_independence,  // n0 = 0: lambda0 fixed at 0, closed forms
    boundary_lambda1_zero,  // n1 = 0: maximum on the lambda1 = 0 face
    boundary_lambda2_zero,  // n2 = 0: maximum on the lambda2 = 0 face
    boundary_degenerate,    // only ties observed
    no_convergence,
};

inline const char* to_string(FitStatus s) {
    switch (s) {
        case FitStatus::ok: return "ok";
        case FitStatus::boundary_independence: return "boundary_independence";
        case FitStatus::boundary_lambda1_zero: return "boundary_lambda1_zero";
        case FitStatus::boundary_lambda2_zero: return "boundary_lambda2_zero";
        case FitStatus::boundary_degenerate: return "boundary_degenerate";
        case FitStatus::no_convergence: return "no_convergence";
    }
    return "unknown";
}

struct FitResult {
    BvrParams params{};
    double r_hat{};
    ClassCounts counts{};
    std::optional<InformationMatrix> info;  // interior fits only
    std::optional<DeltaVariance> delta;     // absent when Sigma is undefined
    double log_likelihood{};
    FitStatus status{FitStatus::no_convergence};
    bool converged{false};
    int iterations{0};
    double final_score_norm{std::numeric_limits<double>::quiet_NaN()};

    bool boundary() const {
        return status != FitStatus::ok && status != FitStatus::no_convergence;
    }
    bool has_sigma() const { return delta.has_value() && delta->sigma > 0.0; }
};

namespace detail {

inline double inf_norm3(const Vec3& v) {
    return std::max({std::fabs(v[0]), std::fabs(v[1]), std::fabs(v[2])});
}

// Delta variance on the closure of the parameter cone: when a rate estimate
// sits at 0 the 3x3 information diverges, but the submodel over the active
// rates still yields an asymptotic variance for R_hat. The covariance is
// returned padded to 3x3 with zero row/column for the pinned rate.
inline std::optional<DeltaVariance> boundary_delta(const BvrParams& p, double n, FitStatus st) {
    DeltaVariance d;
    d.gradient = reliability_gradient(p);
    const double s = p.total();
    d.covariance = Mat3{};
    switch (st) {
        case FitStatus::boundary_independence: {
            // X ~ RA(l1), Y ~ RA(l2) independent: Var(li_hat) = li^2 / n.
            d.covariance(1, 1) = p.lambda1 * p.lambda1 / n;
            d.covariance(2, 2) = p.lambda2 * p.lambda2 / n;
            break;
        }
        case FitStatus::boundary_lambda1_zero: {
            // Submodel (l0, l2): I = diag(n/l0^2, n/(s l2)).
            d.covariance(0, 0) = p.lambda0 * p.lambda0 / n;
            d.covariance(2, 2) = s * p.lambda2 / n;
            break;
        }
        case FitStatus::boundary_lambda2_zero:
        case FitStatus::boundary_degenerate:
            // R_hat = 0 and dR/dlambda2 is paired with a pinned rate: the
            // first-order variance vanishes, so no usable Sigma.
            return std::nullopt;
        default:
            return std::nullopt;
    }
    d.sigma = dot3(d.gradient, mat3_vec(d.covariance, d.gradient));
    if (!(d.sigma > 0.0)) return std::nullopt;
    return d;
}

}  // namespace detail

// Maximum likelihood fit of (lambda0, lambda1, lambda2).
//
// All classes present: damped Newton on the score from a moment start
// (total rate from the min-distribution, split by class frequencies), with
// step halving to stay inside the cone; falls back to log-parameterized
// Newton with line search if the plain iteration stalls. Any empty class
// moves the maximum to a face of the cone where closed forms apply; such
// fits are reported through `status` and carry no 3x3 information matrix.
inline FitResult fit_mle(const PairedSample& sample, const SolverOptions& options = {}) {
    const auto stats = detail::suff_stats(sample, options.tie_tolerance);
    FitResult fit;
    fit.counts = classify(sample, options.tie_tolerance);
    const double n = static_cast<double>(stats.n);

    const auto finish_boundary = [&](BvrParams p, FitStatus st) {
        fit.params = p;
        fit.status = st;
        fit.converged = true;  // exact closed form on the face
        fit.r_hat = p.lambda2 > 0.0 ? p.lambda2 / p.total() : 0.0;
        fit.log_likelihood = detail::loglik(p, stats);
        fit.delta = detail::boundary_delta(p, n, st);
        fit.final_score_norm = 0.0;
        return fit;
    };

    if (stats.n0 == 0) {
        // Independence submodel, lambda0 pinned at 0.
        return finish_boundary({0.0, n / stats.sum_x2, n / stats.sum_y2},
                               FitStatus::boundary_independence);
    }
    if (stats.n1 == 0 && stats.n2 == 0)
        return finish_boundary({n / stats.sum_max2, 0.0, 0.0}, FitStatus::boundary_degenerate);
    if (stats.n1 == 0)
        return finish_boundary({n / stats.sum_max2, 0.0, stats.n2 / stats.sum_y2},
                               FitStatus::boundary_lambda1_zero);
    if (stats.n2 == 0)
        return finish_boundary({n / stats.sum_max2, stats.n1 / stats.sum_x2, 0.0},
                               FitStatus::boundary_lambda2_zero);

    // Solve on scale-normalized data (divide squared sums by their mean min
    // square) so the absolute score tolerance is meaningful for any data
    // units; the MLE maps back exactly by rate = rate_normalized / c2.
    const double c2 = stats.sum_min2 / n;
    detail::SuffStats ns = stats;
    ns.sum_x2 /= c2;
    ns.sum_y2 /= c2;
    ns.sum_max2 /= c2;
    ns.sum_min2 = n;

    // Moment start: total rate from min(X,Y) ~ RA(s), split by frequencies.
    const double s_hat = n / ns.sum_min2;
    BvrParams p{s_hat * stats.n0 / n, s_hat * stats.n1 / n, s_hat * stats.n2 / n};

    double ll = detail::loglik(p, ns);
    Vec3 g = detail::score_from_stats(p, ns);
    int it = 0;
    bool ok = false;
    for (; it < options.max_iterations; ++it) {
        if (detail::inf_norm3(g) <= options.score_tol) { ok = true; break; }
        const Mat3 h = detail::hessian_from_stats(p, ns);
        std::array<std::array<double, 3>, 3> A{};
        std::array<double, 3> d{-g[0], -g[1], -g[2]};
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) A[i][j] = h(i, j);
        if (!solve_linear<3>(A, d)) break;
        double step = 1.0;
        BvrParams cand;
        double cand_ll = -std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int half = 0; half < 60; ++half) {
            cand = {p.lambda0 + step * d[0], p.lambda1 + step * d[1], p.lambda2 + step * d[2]};
            if (cand.lambda0 > 0.0 && cand.lambda1 > 0.0 && cand.lambda2 > 0.0) {
                cand_ll = detail::loglik(cand, ns);
                if (cand_ll >= ll - 1e-13 * std::fabs(ll)) { accepted = true; break; }
            }
            step *= 0.5;
        }
        if (!accepted) break;
        p = cand;
        ll = cand_ll;
        g = detail::score_from_stats(p, ns);
    }
    if (!ok && detail::inf_norm3(g) <= options.score_tol) ok = true;

    if (!ok) {
        // Log-parameterized Newton ascent; unconstrained in eta = log lambda.
        std::array<double, 3> eta{std::log(p.lambda0), std::log(p.lambda1), std::log(p.lambda2)};
        for (int k = 0; k < options.max_iterations && it < 2 * options.max_iterations; ++k, ++it) {
            g = detail::score_from_stats(p, ns);
            if (detail::inf_norm3(g) <= options.score_tol) { ok = true; break; }
            const Mat3 h = detail::hessian_from_stats(p, ns);
            const Vec3 lam{p.lambda0, p.lambda1, p.lambda2};
            std::array<std::array<double, 3>, 3> A{};
            std::array<double, 3> d{};
            for (std::size_t i = 0; i < 3; ++i) {
                d[i] = g[i] * lam[i];
                for (std::size_t j = 0; j < 3; ++j) A[i][j] = -h(i, j) * lam[i] * lam[j];
                A[i][i] -= g[i] * lam[i];
            }
            // A approximates the negative Hessian in eta; fall back to a
            // gradient step if it is not usable.
            std::array<double, 3> dir = d;
            if (!solve_linear<3>(A, dir)) dir = d;
            double step = 1.0;
            bool accepted = false;
            for (int half = 0; half < 60; ++half) {
                std::array<double, 3> ec{eta[0] + step * dir[0], eta[1] + step * dir[1],
                                         eta[2] + step * dir[2]};
                BvrParams cand{std::exp(ec[0]), std::exp(ec[1]), std::exp(ec[2])};
                const double cll = detail::loglik(cand, ns);
                if (cll > ll) {
                    eta = ec;
                    p = cand;
                    ll = cll;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) break;
        }
        g = detail::score_from_stats(p, ns);
        if (detail::inf_norm3(g) <= options.score_tol) ok = true;
    }

    // Map back to the original scale.
    fit.params = {p.lambda0 / c2, p.lambda1 / c2, p.lambda2 / c2};
    fit.r_hat = reliability(fit.params);
    fit.log_likelihood = detail::loglik(fit.params, stats);
    fit.iterations = it;
    fit.final_score_norm = detail::inf_norm3(g);  // norm on the normalized problem
    fit.status = ok ? FitStatus::ok : FitStatus::no_convergence;
    fit.converged = ok;
    if (ok) {
        fit.info = fisher_information(fit.params, n);
        fit.delta = delta_variance(fit.params, n);
    }
    return fit;
}

// ---- Restricted fit under R = r0 --------------------------------------

struct RestrictedFit {
    double lambda0{};
    double lambda1{};
    double r0{};
    double implied_lambda2{};
    double log_likelihood{};
    FitStatus status{FitStatus::no_convergence};
    bool converged{false};
    int iterations{0};
    double final_grad_norm{std::numeric_limits<double>::quiet_NaN()};

    BvrParams params() const { return {lambda0, lambda1, implied_lambda2}; }
};

namespace detail {

inline double restricted_loglik(double l0, double l1, double r0, const SuffStats& s) {
    const double c = r0 / (1.0 - r0);
    return loglik({l0, l1, c * (l0 + l1)}, s);
}

// Analytic gradient of the restricted log-likelihood in (lambda0, lambda1),
// obtained by differentiating through lambda2 = c (lambda0 + lambda1);
// validated against finite differences in the test suite.
inline std::array<double, 2> restricted_score(double l0, double l1, double r0,
                                              const SuffStats& s) {
    const double c = r0 / (1.0 - r0);
    const double t = l0 + l1;
    const double w = l0 + l1 * r0;  // (1 - r0) * (lambda2 + lambda0)
    return {s.n0 / l0 + 2.0 * s.n2 / t + s.n1 / w - s.sum_max2 - c * s.sum_y2,
            s.n1 / l1 + 2.0 * s.n2 / t + s.n1 * r0 / w - s.sum_x2 - c * s.sum_y2};
}

inline std::array<std::array<double, 2>, 2> restricted_hessian(double l0, double l1, double r0,
                                                               const SuffStats& s) {
    const double t = l0 + l1;
    const double w = l0 + l1 * r0;
    const double q = 2.0 * s.n2 / (t * t);
    const double v = s.n1 / (w * w);
    const double d0 = static_cast<double>(s.n0), d1 = static_cast<double>(s.n1);
    return {{{-d0 / (l0 * l0) - q - v, -q - v * r0},
             {-q - v * r0, -d1 / (l1 * l1) - q - v * r0 * r0}}};
}

}  // namespace detail

inline double restricted_log_likelihood(double lambda0, double lambda1, double r0,
                                        const PairedSample& sample) {
    return detail::restricted_loglik(lambda0, lambda1, r0, detail::suff_stats(sample));
}

inline std::array<double, 2> restricted_score(double lambda0, double lambda1, double r0,
                                              const PairedSample& sample) {
    if (!(lambda0 > 0.0) || !(lambda1 > 0.0))
        throw std::invalid_argument("restricted_score: rates must be strictly positive");
    return detail::restricted_score(lambda0, lambda1, r0, detail::suff_stats(sample));
}

// Maximizes the restricted log-likelihood over (lambda0, lambda1) with
// lambda2 implied by r0. Faces with an empty class reduce to closed forms.
inline RestrictedFit restricted_fit(const PairedSample& sample, double r0,
                                    const SolverOptions& options = {}) {
    if (!(r0 > 0.0 && r0 < 1.0))
        throw std::invalid_argument("restricted_fit: r0 must lie strictly inside (0,1)");
    const auto s = detail::suff_stats(sample, options.tie_tolerance);
    const double c = r0 / (1.0 - r0);
    const double n = static_cast<double>(s.n);

    RestrictedFit rf;
    rf.r0 = r0;

    const auto finish = [&](double l0, double l1, FitStatus st, bool ok, int iters,
                            double gnorm) {
        rf.lambda0 = l0;
        rf.lambda1 = l1;
        rf.implied_lambda2 = c * (l0 + l1);
        rf.log_likelihood = detail::restricted_loglik(l0, l1, r0, s);
        rf.status = st;
        rf.converged = ok;
        rf.iterations = iters;
        rf.final_grad_norm = gnorm;
        return rf;
    };

    if (s.n0 == 0 && s.n1 == 0) {
        // Only the y<x class: the likelihood depends on (l0, l1) through
        // l0 + l1 alone (max = x everywhere), so pin l0 = 0 on the ridge.
        const double l1 = 2.0 * n / (s.sum_x2 + c * s.sum_y2);
        return finish(0.0, l1, FitStatus::boundary_degenerate, true, 0, 0.0);
    }
    if (s.n0 == 0) {
        const double l1 = 2.0 * n / (s.sum_x2 + c * s.sum_y2);
        return finish(0.0, l1, FitStatus::boundary_independence, true, 0, 0.0);
    }
    if (s.n1 == 0) {
        const double l0 = (s.n0 + 2.0 * s.n2) / (s.sum_max2 + c * s.sum_y2);
        return finish(l0, 0.0, FitStatus::boundary_lambda1_zero, true, 0, 0.0);
    }

    // Interior Newton on scale-normalized sums; start from the
    // min-distribution moment estimate with the null constraint
    // s = (1+c)(l0+l1), then map back by 1/c2.
    const double c2 = s.sum_min2 / n;
    detail::SuffStats ns = s;
    ns.sum_x2 /= c2;
    ns.sum_y2 /= c2;
    ns.sum_max2 /= c2;
    ns.sum_min2 = n;

    const double t0 = 1.0 - r0;  // normalized total rate estimate is 1
    double l0 = t0 * s.n0 / (s.n0 + s.n1);
    double l1 = t0 * s.n1 / (s.n0 + s.n1);
    double ll = detail::restricted_loglik(l0, l1, r0, ns);
    int it = 0;
    for (; it < options.max_iterations; ++it) {
        const auto g = detail::restricted_score(l0, l1, r0, ns);
        if (std::max(std::fabs(g[0]), std::fabs(g[1])) <= options.score_tol) break;
        auto h = detail::restricted_hessian(l0, l1, r0, ns);
        std::array<double, 2> d{-g[0], -g[1]};
        if (!solve_linear<2>(h, d)) break;
        double step = 1.0;
        bool accepted = false;
        for (int half = 0; half < 60; ++half) {
            const double c0 = l0 + step * d[0];
            const double c1 = l1 + step * d[1];
            if (c0 > 0.0 && c1 > 0.0) {
                const double cll = detail::restricted_loglik(c0, c1, r0, ns);
                if (cll >= ll - 1e-13 * std::fabs(ll)) {
                    l0 = c0; l1 = c1; ll = cll;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }
    const auto g = detail::restricted_score(l0, l1, r0, ns);
    const double gnorm = std::max(std::fabs(g[0]), std::fabs(g[1]));
    const bool ok = gnorm <= options.score_tol;
    return finish(l0 / c2, l1 / c2, ok ? FitStatus::ok : FitStatus::no_convergence, ok, it,
                  gnorm);
}

}  // namespace bvr
