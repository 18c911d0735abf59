#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "bvr/dataio.hpp"
#include "bvr/estimation.hpp"
#include "bvr/model.hpp"

using namespace bvr;
using Catch::Approx;

namespace {

PairedSample make(std::initializer_list<std::pair<double, double>> rows) {
    PairedSample s;
    for (const auto& [x, y] : rows) s.observations.push_back({x, y});
    return s;
}

// Independent density-based log-likelihood: sum of the absolutely continuous
// log-densities off the diagonal plus the singular log-density on it.
double density_loglik(const BvrParams& p, const PairedSample& sample) {
    const double s = p.total();
    double ll = 0.0;
    for (const auto& o : sample.observations) {
        if (o.x == o.y) {
            ll += std::log(2.0 * p.lambda0 * o.x) - s * o.x * o.x;
        } else if (o.x < o.y) {
            ll += std::log(4.0 * (p.lambda2 + p.lambda0) * p.lambda1 * o.x * o.y) -
                  p.lambda1 * o.x * o.x - (p.lambda2 + p.lambda0) * o.y * o.y;
        } else {
            ll += std::log(4.0 * (p.lambda1 + p.lambda0) * p.lambda2 * o.x * o.y) -
                  (p.lambda1 + p.lambda0) * o.x * o.x - p.lambda2 * o.y * o.y;
        }
    }
    return ll;
}

}  // namespace

TEST_CASE("classify partitions by tolerance") {
    const auto c = classify(make({{1, 1}, {1, 2}, {2, 1}}));
    CHECK(c.n0 == 1);
    CHECK(c.n1 == 1);
    CHECK(c.n2 == 1);
    CHECK(c.tied_indices == std::vector<std::size_t>{0});

    const auto ct = classify(make({{1.0, 1.0 + 1e-12}}), 1e-9);
    CHECK(ct.n0 == 1);

    CHECK_THROWS_AS(classify(PairedSample{}), std::invalid_argument);
    CHECK_THROWS_AS(classify(make({{1, 1}}), -1.0), std::invalid_argument);
}

TEST_CASE("classify on the UEFA data") {
    const auto c = classify(uefa_dataset().pairs);
    CHECK(c.n0 == 14);
    CHECK(c.n1 == 6);
    CHECK(c.n2 == 17);
    CHECK(c.n() == 37);
}

TEST_CASE("log-likelihood closed values") {
    CHECK(log_likelihood({1, 1, 1}, make({{1, 1}})) ==
          Approx(std::log(2.0) - 3.0).epsilon(1e-12));
    CHECK(log_likelihood({1, 1, 1}, make({{2, 1}})) ==
          Approx(4.0 * std::log(2.0) - 9.0).epsilon(1e-12));
}

TEST_CASE("zero rate against a nonzero count yields -inf, not a clipped value") {
    const double ll = log_likelihood({0.0, 1, 1}, make({{1, 1}, {2, 1}}));
    CHECK(std::isinf(ll));
    CHECK(ll < 0.0);
}

TEST_CASE("log-likelihood agrees with the density derivation") {
    Rng rng(31);
    for (int rep = 0; rep < 50; ++rep) {
        const BvrParams truth{0.3 + rng.uniform(), 0.3 + rng.uniform(), 0.3 + rng.uniform()};
        Rng srng = rng.derive(rep);
        const auto sample = sample_bvr(truth, 40, srng);
        const BvrParams at{0.2 + rng.uniform(), 0.2 + rng.uniform(), 0.2 + rng.uniform()};
        const double a = log_likelihood(at, sample);
        const double b = density_loglik(at, sample);
        CHECK(a == Approx(b).epsilon(1e-9));
    }
}

TEST_CASE("score closed value and stationarity at the MLE") {
    const auto g = score({1, 1, 1}, make({{2, 1}}));
    CHECK(g[1] == Approx(-3.5).epsilon(1e-13));

    const auto fit = fit_mle(uefa_dataset().pairs);
    REQUIRE(fit.status == FitStatus::ok);
    const auto gs = score(fit.params, uefa_dataset().pairs);
    for (double v : gs) CHECK(std::fabs(v) < 1e-8);

    CHECK_THROWS_AS(score({0.0, 1, 1}, make({{2, 1}})), std::invalid_argument);
}

TEST_CASE("score matches the finite-difference gradient") {
    Rng rng(7);
    int cases = 0;
    while (cases < 200) {
        const BvrParams truth{0.2 + 2.0 * rng.uniform(), 0.2 + 2.0 * rng.uniform(),
                              0.2 + 2.0 * rng.uniform()};
        Rng srng = rng.derive(1000 + cases);
        const auto sample = sample_bvr(truth, 30, srng);
        if (classify(sample).n0 == 0) continue;
        const BvrParams at{0.3 + rng.uniform(), 0.3 + rng.uniform(), 0.3 + rng.uniform()};
        const auto g = score(at, sample);
        std::array<double, 3> lam{at.lambda0, at.lambda1, at.lambda2};
        for (std::size_t j = 0; j < 3; ++j) {
            const double h = 1e-6 * lam[j];
            auto lo = lam, hi = lam;
            lo[j] -= h;
            hi[j] += h;
            const double fd = (log_likelihood({hi[0], hi[1], hi[2]}, sample) -
                               log_likelihood({lo[0], lo[1], lo[2]}, sample)) /
                              (2.0 * h);
            CHECK(std::fabs(fd - g[j]) <= 1e-5 * std::max(1.0, std::fabs(g[j])));
        }
        ++cases;
    }
}

TEST_CASE("expected class counts match the direct probabilities") {
    const auto sym = expected_class_counts({1, 1, 1}, 300);
    CHECK(sym[0] == Approx(100.0).epsilon(1e-12));
    CHECK(sym[1] == Approx(100.0).epsilon(1e-12));
    CHECK(sym[2] == Approx(100.0).epsilon(1e-12));

    Rng rng(13);
    for (int i = 0; i < 200; ++i) {
        const BvrParams p{3.0 * rng.uniform() + 0.01, 0.05 + 2.0 * rng.uniform(),
                          0.05 + 2.0 * rng.uniform()};
        const double n = 50.0 + 500.0 * rng.uniform();
        const auto e = expected_class_counts(p, n);
        CHECK(e[0] + e[1] + e[2] == Approx(n).epsilon(1e-12));
        const auto cp = class_probabilities(p);
        CHECK(std::fabs(e[0] - n * cp.tie) < 1e-10 * n);
        CHECK(std::fabs(e[1] - n * cp.x_lt_y) < 1e-10 * n);
        CHECK(std::fabs(e[2] - n * cp.y_lt_x) < 1e-10 * n);
    }
}

TEST_CASE("empirical class counts match their expectations") {
    const BvrParams p{1.5, 0.8, 1.2};
    const std::size_t n = 60;
    const int reps = 2000;
    Rng rng(55);
    double sums[3] = {0, 0, 0};
    for (int r = 0; r < reps; ++r) {
        Rng srng = rng.derive(r);
        const auto c = classify(sample_bvr(p, n, srng));
        sums[0] += c.n0;
        sums[1] += c.n1;
        sums[2] += c.n2;
    }
    const auto e = expected_class_counts(p, n);
    const auto cp = class_probabilities(p);
    const double probs[3] = {cp.tie, cp.x_lt_y, cp.y_lt_x};
    for (int k = 0; k < 3; ++k) {
        const double se = std::sqrt(n * probs[k] * (1.0 - probs[k]) / reps);
        CHECK(std::fabs(sums[k] / reps - e[k]) < 3.0 * se);
    }
}

TEST_CASE("fisher information structure") {
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        const BvrParams p{0.05 + 3.0 * rng.uniform(), 0.05 + 3.0 * rng.uniform(),
                          0.05 + 3.0 * rng.uniform()};
        const auto info = fisher_information(p, 100);
        CHECK(info.entries(1, 2) == 0.0);
        CHECK(info.entries(2, 1) == 0.0);
        CHECK(info.entries(0, 1) == info.entries(1, 0));
        CHECK_NOTHROW(spd_inverse3(info.entries));  // positive definite
        CHECK(info.per_observation(0, 0) == Approx(info.entries(0, 0) / 100.0));
    }
    CHECK_THROWS_AS(fisher_information({0.0, 1, 1}, 10), std::invalid_argument);
}

TEST_CASE("fisher information matches the Monte Carlo mean negative hessian") {
    const BvrParams p{1, 1, 1};
    const std::size_t n = 200;
    const int reps = 400;
    Rng rng(77);
    const double h = 1e-4;
    double mean[3][3] = {};
    double m2[3][3] = {};
    for (int r = 0; r < reps; ++r) {
        Rng srng = rng.derive(r);
        const auto sample = sample_bvr(p, n, srng);
        const auto stats = detail::suff_stats(sample);
        const auto ll = [&](double a, double b, double c) {
            return detail::loglik({a, b, c}, stats);
        };
        double hess[3][3];
        const std::array<double, 3> lam{p.lambda0, p.lambda1, p.lambda2};
        for (int i = 0; i < 3; ++i)
            for (int j = i; j < 3; ++j) {
                auto at = [&](double di, double dj) {
                    std::array<double, 3> q = lam;
                    q[i] += di;
                    q[j] += dj;
                    return ll(q[0], q[1], q[2]);
                };
                hess[i][j] = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4 * h * h);
            }
        for (int i = 0; i < 3; ++i)
            for (int j = i; j < 3; ++j) {
                const double v = -hess[i][j];
                const double d = v - mean[i][j];
                mean[i][j] += d / (r + 1);
                m2[i][j] += d * (v - mean[i][j]);
            }
    }
    const auto info = fisher_information(p, n);
    for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j) {
            const double se = std::sqrt(m2[i][j] / (reps - 1) / reps);
            CHECK(std::fabs(mean[i][j] - info.entries(i, j)) < 3.0 * se + 1e-6);
        }
}

TEST_CASE("delta variance gradient and 1/n scaling") {
    const auto d = delta_variance({1, 1, 1}, 100);
    CHECK(d.gradient[0] == Approx(-1.0 / 9.0).epsilon(1e-13));
    CHECK(d.gradient[1] == Approx(-1.0 / 9.0).epsilon(1e-13));
    CHECK(d.gradient[2] == Approx(2.0 / 9.0).epsilon(1e-13));
    CHECK(d.sigma > 0.0);
    CHECK(d.sigma == Approx(dot3(d.gradient, mat3_vec(d.covariance, d.gradient))));

    const auto d2 = delta_variance({1, 1, 1}, 200);
    CHECK(d2.sigma == Approx(d.sigma / 2.0).epsilon(1e-10));
}

TEST_CASE("delta variance tracks the sampling variance of the estimate") {
    const BvrParams p{1.2, 0.9, 1.1};
    const std::size_t n = 200;
    const int reps = 2000;
    Rng rng(101);
    std::vector<double> rhats;
    rhats.reserve(reps);
    for (int r = 0; r < reps; ++r) {
        Rng srng = rng.derive(r);
        const auto fit = fit_mle(sample_bvr(p, n, srng));
        if (fit.status == FitStatus::ok) rhats.push_back(fit.r_hat);
    }
    double mean = 0.0;
    for (double v : rhats) mean += v;
    mean /= rhats.size();
    double var = 0.0;
    for (double v : rhats) var += (v - mean) * (v - mean);
    var /= rhats.size();
    const double sigma = delta_variance(p, n).sigma;
    CHECK(std::fabs(var - sigma) < 0.15 * sigma);
}

TEST_CASE("natural estimate") {
    CHECK(natural_estimate(uefa_dataset().pairs) == Approx(17.0 / 37.0).epsilon(1e-14));
    CHECK(natural_estimate(make({{2, 1}, {3, 1}})) == 1.0);
}

TEST_CASE("natural estimate is binomial") {
    const BvrParams p{1, 1, 1};
    const double R = 1.0 / 3.0;
    const std::size_t n = 100;
    const int reps = 2000;
    Rng rng(303);
    double sum = 0.0, sum2 = 0.0;
    for (int r = 0; r < reps; ++r) {
        Rng srng = rng.derive(r);
        const double v = natural_estimate(sample_bvr(p, n, srng));
        sum += v;
        sum2 += v * v;
    }
    const double mean = sum / reps;
    const double var = sum2 / reps - mean * mean;
    const double ref_var = R * (1.0 - R) / n;
    CHECK(std::fabs(mean - R) < 3.0 * std::sqrt(ref_var / reps));
    CHECK(std::fabs(var - ref_var) < 0.2 * ref_var);
}

TEST_CASE("UEFA maximum likelihood fit") {
    const auto fit = fit_mle(uefa_dataset().pairs);
    REQUIRE(fit.converged);
    REQUIRE(fit.status == FitStatus::ok);
    CHECK(fit.r_hat == Approx(0.4228).margin(5e-4));
    CHECK(fit.r_hat == Approx(0.42281676885036518).epsilon(1e-10));
    CHECK(fit.params.lambda0 == Approx(0.00031783231633856102).epsilon(1e-8));
    CHECK(fit.params.lambda1 == Approx(0.00014961981616341854).epsilon(1e-8));
    CHECK(fit.params.lambda2 == Approx(0.0003424330257534108).epsilon(1e-8));
    CHECK(fit.log_likelihood == Approx(-290.69872518510454).epsilon(1e-10));
    CHECK(fit.final_score_norm < 1e-10);
    CHECK(fit.r_hat == reliability(fit.params));
    REQUIRE(fit.info.has_value());
    CHECK_NOTHROW(spd_inverse3(fit.info->entries));
    REQUIRE(fit.delta.has_value());
    CHECK(fit.delta->sigma == Approx(0.005278427727717685).epsilon(1e-8));
}

TEST_CASE("consistency at large n") {
    const BvrParams truth{1.5, 1.0, 1.0};
    Rng rng(42);
    const auto fit = fit_mle(sample_bvr(truth, 50000, rng));
    REQUIRE(fit.status == FitStatus::ok);
    CHECK(std::fabs(fit.params.lambda0 - 1.5) < 0.045);
    CHECK(std::fabs(fit.params.lambda1 - 1.0) < 0.03);
    CHECK(std::fabs(fit.params.lambda2 - 1.0) < 0.03);
    CHECK(std::fabs(fit.r_hat - 1.0 / 3.5) < 0.01);
}

TEST_CASE("swapping coordinates exchanges lambda1 and lambda2") {
    Rng rng(88);
    const auto sample = sample_bvr({0.8, 1.4, 0.6}, 200, rng);
    PairedSample swapped;
    for (const auto& o : sample.observations) swapped.observations.push_back({o.y, o.x});
    const auto f1 = fit_mle(sample);
    const auto f2 = fit_mle(swapped);
    REQUIRE(f1.status == FitStatus::ok);
    REQUIRE(f2.status == FitStatus::ok);
    CHECK(f2.params.lambda0 == Approx(f1.params.lambda0).epsilon(1e-9));
    CHECK(f2.params.lambda1 == Approx(f1.params.lambda2).epsilon(1e-9));
    CHECK(f2.params.lambda2 == Approx(f1.params.lambda1).epsilon(1e-9));
}

TEST_CASE("scale equivariance of the fit") {
    Rng rng(21);
    const auto sample = sample_bvr({1.0, 1.0, 1.5}, 120, rng);
    const auto base = fit_mle(sample);
    REQUIRE(base.status == FitStatus::ok);
    for (double c : {0.5, 2.0}) {
        PairedSample scaled;
        for (const auto& o : sample.observations) scaled.observations.push_back({c * o.x, c * o.y});
        const auto fit = fit_mle(scaled);
        REQUIRE(fit.status == FitStatus::ok);
        CHECK(fit.params.lambda0 == Approx(base.params.lambda0 / (c * c)).epsilon(1e-6));
        CHECK(fit.params.lambda1 == Approx(base.params.lambda1 / (c * c)).epsilon(1e-6));
        CHECK(fit.params.lambda2 == Approx(base.params.lambda2 / (c * c)).epsilon(1e-6));
        CHECK(fit.r_hat == Approx(base.r_hat).margin(1e-6));
    }
}

TEST_CASE("boundary fits") {
    SECTION("no ties: independence submodel") {
        Rng rng(9);
        const auto sample = sample_bvr({0.0, 1.0, 2.0}, 60, rng);
        const auto fit = fit_mle(sample);
        CHECK(fit.status == FitStatus::boundary_independence);
        CHECK(fit.converged);
        CHECK(fit.params.lambda0 == 0.0);
        double sx2 = 0, sy2 = 0;
        for (const auto& o : sample.observations) {
            sx2 += o.x * o.x;
            sy2 += o.y * o.y;
        }
        CHECK(fit.params.lambda1 == Approx(60.0 / sx2).epsilon(1e-12));
        CHECK(fit.params.lambda2 == Approx(60.0 / sy2).epsilon(1e-12));
        CHECK(fit.has_sigma());
        CHECK_FALSE(fit.info.has_value());
    }
    SECTION("no x<y observations: lambda1 face") {
        const auto sample = make({{3, 3}, {5, 2}, {4, 1}, {2, 2}});
        const auto fit = fit_mle(sample);
        CHECK(fit.status == FitStatus::boundary_lambda1_zero);
        CHECK(fit.params.lambda1 == 0.0);
        // face closed forms: lambda0 = n / sum max^2, lambda2 = n2 / sum y^2
        CHECK(fit.params.lambda0 == Approx(4.0 / (9.0 + 25 + 16 + 4)).epsilon(1e-12));
        CHECK(fit.params.lambda2 == Approx(2.0 / (9.0 + 4 + 1 + 4)).epsilon(1e-12));
        CHECK(fit.r_hat == reliability(fit.params));
        // interior log-likelihoods cannot beat the face maximum
        Rng rng(2);
        for (int i = 0; i < 200; ++i) {
            const BvrParams q{0.01 + rng.uniform(), 1e-4 + 0.3 * rng.uniform(),
                              0.01 + rng.uniform()};
            CHECK(log_likelihood(q, sample) <= fit.log_likelihood + 1e-9);
        }
    }
    SECTION("no y<x observations: lambda2 face") {
        const auto sample = make({{3, 3}, {2, 5}, {1, 4}});
        const auto fit = fit_mle(sample);
        CHECK(fit.status == FitStatus::boundary_lambda2_zero);
        CHECK(fit.params.lambda2 == 0.0);
        CHECK(fit.r_hat == 0.0);
        CHECK_FALSE(fit.has_sigma());
    }
    SECTION("all tied") {
        const auto sample = make({{2, 2}, {3, 3}});
        const auto fit = fit_mle(sample);
        CHECK(fit.status == FitStatus::boundary_degenerate);
        CHECK(fit.params.lambda0 == Approx(2.0 / 13.0).epsilon(1e-12));
        CHECK(fit.r_hat == 0.0);
    }
}

TEST_CASE("restricted fit reproduces the unrestricted optimum at r0 = r_hat") {
    const auto sample = uefa_dataset().pairs;
    const auto fit = fit_mle(sample);
    const auto rf = restricted_fit(sample, fit.r_hat);
    REQUIRE(rf.converged);
    CHECK(rf.log_likelihood == Approx(fit.log_likelihood).margin(1e-8));
    CHECK(rf.lambda0 == Approx(fit.params.lambda0).epsilon(1e-6));
    CHECK(rf.lambda1 == Approx(fit.params.lambda1).epsilon(1e-6));
    CHECK(rf.implied_lambda2 == Approx(fit.params.lambda2).epsilon(1e-6));
    // reliability of the implied triple equals r0
    CHECK(reliability(rf.params()) == Approx(rf.r0).margin(1e-10));
}

TEST_CASE("restricted score is the gradient of the restricted log-likelihood") {
    Rng rng(61);
    for (int rep = 0; rep < 50; ++rep) {
        Rng srng = rng.derive(rep);
        const auto sample = sample_bvr({1.0, 0.8, 1.3}, 40, srng);
        if (classify(sample).n0 == 0) continue;
        const double r0 = 0.1 + 0.8 * rng.uniform();
        const double l0 = 0.3 + rng.uniform(), l1 = 0.3 + rng.uniform();
        const auto g = restricted_score(l0, l1, r0, sample);
        const double h = 1e-6;
        const double fd0 = (restricted_log_likelihood(l0 + h, l1, r0, sample) -
                            restricted_log_likelihood(l0 - h, l1, r0, sample)) /
                           (2 * h);
        const double fd1 = (restricted_log_likelihood(l0, l1 + h, r0, sample) -
                            restricted_log_likelihood(l0, l1 - h, r0, sample)) /
                           (2 * h);
        CHECK(g[0] == Approx(fd0).margin(1e-4));
        CHECK(g[1] == Approx(fd1).margin(1e-4));
    }
}

TEST_CASE("restricted fit stationarity and nesting") {
    Rng rng(71);
    for (int rep = 0; rep < 10; ++rep) {
        Rng srng = rng.derive(rep);
        const auto sample = sample_bvr({1.0, 1.0, 1.0}, 50, srng);
        const auto c = classify(sample);
        if (c.n0 == 0 || c.n1 == 0 || c.n2 == 0) continue;
        const auto fit = fit_mle(sample);
        for (double r0 = 0.1; r0 < 0.95; r0 += 0.1) {
            const auto rf = restricted_fit(sample, r0);
            REQUIRE(rf.converged);
            CHECK(rf.final_grad_norm < 1e-8);
            CHECK(rf.log_likelihood <= fit.log_likelihood + 1e-9);
        }
    }
    CHECK_THROWS_AS(restricted_fit(uefa_dataset().pairs, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(restricted_fit(uefa_dataset().pairs, 1.0), std::invalid_argument);
}
