#pragma once

// Interval estimation and hypothesis tests for the reliability R:
// asymptotic normal intervals/tests from the delta-method variance,
// parametric percentile bootstrap, and the simulation-based computational
// approach (CAT) with its interval construction by test inversion.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bvr/estimation.hpp"
#include "bvr/math.hpp"
#include "bvr/model.hpp"
#include "bvr/rng.hpp"

namespace bvr {

enum class Method { asymptotic, bootstrap, cat };
enum class Alternative { less, greater, two_sided };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::asymptotic: return "asymptotic";
        case Method::bootstrap: return "bootstrap";
        case Method::cat: return "cat";
    }
    return "unknown";
}

inline const char* to_string(Alternative a) {
    switch (a) {
        case Alternative::less: return "less";
        case Alternative::greater: return "greater";
        case Alternative::two_sided: return "two_sided";
    }
    return "unknown";
}

struct MonteCarloConfig {
    std::size_t replicates{1000};  // NBOOT for bootstrap, M for CAT
    std::uint64_t seed{0};
    unsigned workers{1};
};

inline void validate(const MonteCarloConfig& cfg) {
    if (cfg.replicates < 100)
        throw std::invalid_argument("MonteCarloConfig: replicates must be >= 100");
}

// Smoothed cutoff curves fitted across the CAT grid.
struct CatCurve {
    std::vector<double> grid;
    std::vector<double> lower_bounds;
    std::vector<double> upper_bounds;
    std::vector<double> g_lower;  // polynomial coefficients, increasing degree
    std::vector<double> g_upper;
    int degree{2};
    double residual_lower{};
    double residual_upper{};
    bool monotone_warning{false};
};

struct IntervalDiagnostics {
    std::size_t replicates_used{};
    std::size_t replicate_failures{};
    double clamped_lower{};
    double clamped_upper{};
    std::optional<CatCurve> curve;
    std::string note;
};

struct IntervalEstimate {
    double lower{};
    double upper{};
    double level{};  // 1 - alpha
    Method method{};
    IntervalDiagnostics diagnostics{};
};

struct TestResult {
    double r0{};
    Alternative alternative{};
    double alpha{};
    double p_value{};
    bool reject{};
    Method method{};
    std::optional<double> statistic;      // asymptotic z statistic
    std::optional<double> cutoff_lower;   // CAT order-statistic cutoffs
    std::optional<double> cutoff_upper;
    std::size_t replicates_used{};
    std::size_t replicate_failures{};
};

namespace detail {

inline void require_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("alpha must lie strictly inside (0,1)");
}

inline double fit_sigma_or_throw(const FitResult& fit) {
    if (!fit.converged)
        throw std::invalid_argument("asymptotic inference requires a converged fit");
    if (!fit.has_sigma())
        throw std::invalid_argument("asymptotic inference: degenerate variance (Sigma <= 0)");
    return fit.delta->sigma;
}

}  // namespace detail

// R_hat -/+ z_{1-alpha/2} sqrt(Sigma_hat). Raw bounds are reported as is;
// the [0,1]-clamped pair sits in the diagnostics.
inline IntervalEstimate asymptotic_ci(const FitResult& fit, double alpha) {
    detail::require_alpha(alpha);
    const double sigma = detail::fit_sigma_or_throw(fit);
    const double z = normal_quantile(1.0 - alpha / 2.0);
    const double half = z * std::sqrt(sigma);
    IntervalEstimate e;
    e.lower = fit.r_hat - half;
    e.upper = fit.r_hat + half;
    e.level = 1.0 - alpha;
    e.method = Method::asymptotic;
    e.diagnostics.clamped_lower = std::max(0.0, e.lower);
    e.diagnostics.clamped_upper = std::min(1.0, e.upper);
    return e;
}

inline TestResult asymptotic_test(const FitResult& fit, double r0, Alternative alternative,
                                  double alpha) {
    detail::require_alpha(alpha);
    if (!(r0 > 0.0 && r0 < 1.0))
        throw std::invalid_argument("asymptotic_test: r0 must lie strictly inside (0,1)");
    const double sigma = detail::fit_sigma_or_throw(fit);
    const double z = (fit.r_hat - r0) / std::sqrt(sigma);
    TestResult t;
    t.r0 = r0;
    t.alternative = alternative;
    t.alpha = alpha;
    t.method = Method::asymptotic;
    t.statistic = z;
    switch (alternative) {
        case Alternative::greater:
            t.p_value = 1.0 - normal_cdf(z);
            t.reject = z > normal_quantile(1.0 - alpha);
            break;
        case Alternative::less:
            t.p_value = normal_cdf(z);
            t.reject = z < -normal_quantile(1.0 - alpha);
            break;
        case Alternative::two_sided:
            t.p_value = 2.0 * (1.0 - normal_cdf(std::fabs(z)));
            t.reject = std::fabs(z) > normal_quantile(1.0 - alpha / 2.0);
            break;
    }
    return t;
}

namespace detail {

// Order statistic with 1-based index ceil(q * m) on a sorted vector.
inline double order_quantile(const std::vector<double>& sorted, double q) {
    const std::size_t m = sorted.size();
    std::size_t idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(m)));
    idx = std::clamp<std::size_t>(idx, 1, m);
    return sorted[idx - 1];
}

// Simulates `replicates` samples of size n from `params`, refits each and
// returns the replicate reliability estimates. Fits that fail to converge
// are dropped and counted; boundary fits still carry the face MLE of R and
// are kept.
inline std::vector<double> replicate_rhats(const BvrParams& params, std::size_t n,
                                           const MonteCarloConfig& cfg, const Rng& root,
                                           std::size_t& failures) {
    std::vector<double> rhats(cfg.replicates,
                              std::numeric_limits<double>::quiet_NaN());
    parallel_for(cfg.replicates, cfg.workers, [&](std::size_t i) {
        Rng rng = root.derive(i);
        const PairedSample sample = sample_bvr(params, n, rng);
        const FitResult fit = fit_mle(sample);
        if (fit.status != FitStatus::no_convergence) rhats[i] = fit.r_hat;
    });
    std::vector<double> usable;
    usable.reserve(rhats.size());
    for (double r : rhats)
        if (!std::isnan(r)) usable.push_back(r);
    failures = rhats.size() - usable.size();
    return usable;
}

inline void check_failure_budget(std::size_t failures, std::size_t total, const char* what) {
    if (failures * 10 > total)
        throw std::runtime_error(std::string(what) + ": more than 10% of replicate fits failed (" +
                                 std::to_string(failures) + "/" + std::to_string(total) + ")");
}

}  // namespace detail

// Parametric percentile bootstrap: fit, resimulate NBOOT samples from the
// fitted rates, refit each, and take the alpha/2 and 1-alpha/2 empirical
// quantiles of the replicate estimates.
inline IntervalEstimate bootstrap_ci(const PairedSample& sample, double alpha,
                                     const MonteCarloConfig& cfg) {
    detail::require_alpha(alpha);
    validate(cfg);
    const FitResult fit = fit_mle(sample);
    if (fit.status == FitStatus::no_convergence)
        throw std::runtime_error("bootstrap_ci: base fit did not converge");
    std::size_t failures = 0;
    std::vector<double> rhats = detail::replicate_rhats(fit.params, sample.n(), cfg,
                                                        Rng(cfg.seed), failures);
    detail::check_failure_budget(failures, cfg.replicates, "bootstrap_ci");
    std::sort(rhats.begin(), rhats.end());
    IntervalEstimate e;
    e.lower = detail::order_quantile(rhats, alpha / 2.0);
    e.upper = detail::order_quantile(rhats, 1.0 - alpha / 2.0);
    e.level = 1.0 - alpha;
    e.method = Method::bootstrap;
    e.diagnostics.replicates_used = rhats.size();
    e.diagnostics.replicate_failures = failures;
    e.diagnostics.clamped_lower = e.lower;
    e.diagnostics.clamped_upper = e.upper;
    return e;
}

// Computational approach test. Simulates M samples under the restricted
// (null) MLE, refits the unrestricted estimate on each, and compares the
// observed estimate against the resulting order statistics.
inline TestResult cat_test(const PairedSample& sample, double r0, Alternative alternative,
                           double alpha, const MonteCarloConfig& cfg) {
    detail::require_alpha(alpha);
    validate(cfg);
    const FitResult fit = fit_mle(sample);
    if (fit.status == FitStatus::no_convergence)
        throw std::runtime_error("cat_test: unrestricted fit did not converge");
    const RestrictedFit rfit = restricted_fit(sample, r0);
    if (!rfit.converged)
        throw std::runtime_error("cat_test: restricted fit did not converge");

    std::size_t failures = 0;
    std::vector<double> rhats = detail::replicate_rhats(rfit.params(), sample.n(), cfg,
                                                        Rng(cfg.seed), failures);
    detail::check_failure_budget(failures, cfg.replicates, "cat_test");
    std::sort(rhats.begin(), rhats.end());
    const double m = static_cast<double>(rhats.size());
    double below = 0.0, above = 0.0;
    for (double r : rhats) {
        if (r < fit.r_hat) ++below;
        if (r > fit.r_hat) ++above;
    }
    const double p1 = below / m;
    const double p2 = above / m;

    TestResult t;
    t.r0 = r0;
    t.alternative = alternative;
    t.alpha = alpha;
    t.method = Method::cat;
    t.replicates_used = rhats.size();
    t.replicate_failures = failures;
    switch (alternative) {
        case Alternative::less:
            t.cutoff_lower = detail::order_quantile(rhats, alpha);
            t.p_value = p1;
            break;
        case Alternative::greater:
            t.cutoff_upper = detail::order_quantile(rhats, 1.0 - alpha);
            t.p_value = p2;
            break;
        case Alternative::two_sided:
            t.cutoff_lower = detail::order_quantile(rhats, alpha / 2.0);
            t.cutoff_upper = detail::order_quantile(rhats, 1.0 - alpha / 2.0);
            t.p_value = std::min(1.0, 2.0 * std::min(p1, p2));
            break;
    }
    t.reject = t.p_value < alpha;
    return t;
}

// Default inversion grid: k points centered at the fitted estimate spanning
// +/- 4 estimated standard deviations, clipped to (0.02, 0.98).
inline std::vector<double> default_cat_grid(const FitResult& fit, std::size_t k = 10) {
    if (k < 2) throw std::invalid_argument("default_cat_grid: need at least 2 grid points");
    const double sigma = detail::fit_sigma_or_throw(fit);
    const double sd = std::sqrt(sigma);
    const double lo = std::max(0.02, fit.r_hat - 4.0 * sd);
    const double hi = std::min(0.98, fit.r_hat + 4.0 * sd);
    std::vector<double> grid(k);
    for (std::size_t i = 0; i < k; ++i)
        grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(k - 1);
    return grid;
}

struct CatInversionError : std::runtime_error {
    CatCurve curve;
    CatInversionError(const std::string& msg, CatCurve c)
        : std::runtime_error(msg), curve(std::move(c)) {}
};

// CAT confidence interval: run the two-sided cutoff computation on each grid
// null value, smooth the cutoff sequences with least-squares polynomials and
// invert them at the observed estimate by bisection. Each grid point uses a
// fresh, independently derived replicate stream.
inline IntervalEstimate cat_interval(const PairedSample& sample, double alpha,
                                     std::span<const double> grid, const MonteCarloConfig& cfg,
                                     int degree = 2) {
    detail::require_alpha(alpha);
    validate(cfg);
    if (grid.size() < 8 || grid.size() > 12)
        throw std::invalid_argument("cat_interval: grid size must be between 8 and 12");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0 && grid[i] < 1.0))
            throw std::invalid_argument("cat_interval: grid values must lie inside (0,1)");
        if (i > 0 && !(grid[i] > grid[i - 1]))
            throw std::invalid_argument("cat_interval: grid must be strictly increasing");
    }
    const FitResult fit = fit_mle(sample);
    if (fit.status == FitStatus::no_convergence)
        throw std::runtime_error("cat_interval: unrestricted fit did not converge");

    CatCurve curve;
    curve.degree = degree;
    curve.grid.assign(grid.begin(), grid.end());
    curve.lower_bounds.resize(grid.size());
    curve.upper_bounds.resize(grid.size());
    std::size_t total_failures = 0;
    const Rng root(cfg.seed);
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const RestrictedFit rfit = restricted_fit(sample, grid[j]);
        if (!rfit.converged)
            throw std::runtime_error("cat_interval: restricted fit failed at r0 = " +
                                     std::to_string(grid[j]));
        std::size_t failures = 0;
        std::vector<double> rhats =
            detail::replicate_rhats(rfit.params(), sample.n(), cfg, root.derive(j), failures);
        detail::check_failure_budget(failures, cfg.replicates, "cat_interval");
        total_failures += failures;
        std::sort(rhats.begin(), rhats.end());
        curve.lower_bounds[j] = detail::order_quantile(rhats, alpha / 2.0);
        curve.upper_bounds[j] = detail::order_quantile(rhats, 1.0 - alpha / 2.0);
    }

    curve.g_lower = polyfit(curve.grid, curve.lower_bounds, degree);
    curve.g_upper = polyfit(curve.grid, curve.upper_bounds, degree);
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double rl = polyval(curve.g_lower, grid[j]) - curve.lower_bounds[j];
        const double ru = polyval(curve.g_upper, grid[j]) - curve.upper_bounds[j];
        curve.residual_lower = std::max(curve.residual_lower, std::fabs(rl));
        curve.residual_upper = std::max(curve.residual_upper, std::fabs(ru));
    }
    for (std::size_t j = 1; j < grid.size(); ++j) {
        if (polyval(curve.g_lower, grid[j]) < polyval(curve.g_lower, grid[j - 1]) ||
            polyval(curve.g_upper, grid[j]) < polyval(curve.g_upper, grid[j - 1]))
            curve.monotone_warning = true;
    }

    const double blo = std::max(0.001, grid.front() - 0.05);
    const double bhi = std::min(0.999, grid.back() + 0.05);
    double lower, upper;
    try {
        upper = bisect([&](double r) { return polyval(curve.g_lower, r) - fit.r_hat; }, blo, bhi);
        lower = bisect([&](double r) { return polyval(curve.g_upper, r) - fit.r_hat; }, blo, bhi);
    } catch (const std::runtime_error& e) {
        throw CatInversionError(std::string("cat_interval: ") + e.what() +
                                    " (estimate outside the smoothed cutoff range)",
                                curve);
    }

    IntervalEstimate est;
    est.lower = lower;
    est.upper = upper;
    est.level = 1.0 - alpha;
    est.method = Method::cat;
    est.diagnostics.replicates_used = grid.size() * cfg.replicates - total_failures;
    est.diagnostics.replicate_failures = total_failures;
    est.diagnostics.clamped_lower = std::clamp(lower, 0.0, 1.0);
    est.diagnostics.clamped_upper = std::clamp(upper, 0.0, 1.0);
    est.diagnostics.curve = std::move(curve);
    est.diagnostics.note = "fresh replicate draws per grid point";
    return est;
}

inline IntervalEstimate cat_interval(const PairedSample& sample, double alpha,
                                     const MonteCarloConfig& cfg, int degree = 2) {
    const FitResult fit = fit_mle(sample);
    if (fit.status == FitStatus::no_convergence)
        throw std::runtime_error("cat_interval: unrestricted fit did not converge");
    const auto grid = default_cat_grid(fit);
    return cat_interval(sample, alpha, grid, cfg, degree);
}

}  // namespace bvr
