#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "bvr/dataio.hpp"
#include "bvr/gof.hpp"

using namespace bvr;
using Catch::Approx;

TEST_CASE("rayleigh fit closed form") {
    std::vector<double> one{1.0};
    CHECK(fit_rayleigh(one).theta == Approx(1.0).epsilon(1e-14));

    std::vector<double> xs{0.5, 1.2, 2.0, 0.9};
    const double base = fit_rayleigh(xs).theta;
    std::vector<double> scaled;
    for (double v : xs) scaled.push_back(3.0 * v);
    CHECK(fit_rayleigh(scaled).theta == Approx(base / 9.0).epsilon(1e-12));

    CHECK_THROWS_AS(fit_rayleigh(std::vector<double>{}), std::invalid_argument);
    CHECK_THROWS_AS(fit_rayleigh(std::vector<double>{1.0, -2.0}), std::invalid_argument);
}

TEST_CASE("rayleigh fit maximizes the likelihood (grid oracle)") {
    Rng rng(14);
    std::vector<double> xs;
    for (int i = 0; i < 60; ++i) xs.push_back(rayleigh_sample({0.7}, rng));
    const double theta_hat = fit_rayleigh(xs).theta;
    const auto loglik = [&](double th) {
        double ll = 0.0;
        for (double x : xs) ll += std::log(2.0 * th * x) - th * x * x;
        return ll;
    };
    const double ll_hat = loglik(theta_hat);
    for (double th = 0.2 * theta_hat; th < 3.0 * theta_hat; th += 0.01 * theta_hat)
        CHECK(loglik(th) <= ll_hat + 1e-9);
}

TEST_CASE("KS on the UEFA columns") {
    const auto ds = uefa_dataset();
    std::vector<double> x1, x2;
    for (const auto& o : ds.pairs.observations) {
        x1.push_back(o.x);
        x2.push_back(o.y);
    }
    const auto k1 = ks_test(x1);
    CHECK(k1.theta_hat.theta == Approx(37.0 / 76469.0).epsilon(1e-12));
    CHECK(k1.statistic == Approx(0.0885151637519686).epsilon(1e-10));
    CHECK(k1.p_value == Approx(0.933970616669209).epsilon(1e-9));

    const auto k2 = ks_test(x2);
    CHECK(k2.theta_hat.theta == Approx(37.0 / 58732.0).epsilon(1e-12));
    CHECK(k2.statistic == Approx(0.209683310986686).epsilon(1e-10));
    CHECK(k2.p_value == Approx(0.0772680122005433).epsilon(1e-9));
}

TEST_CASE("KS at the inverse-cdf grid construction") {
    const RayleighParams th{0.8};
    const std::size_t n = 25;
    std::vector<double> xs;
    for (std::size_t i = 1; i <= n; ++i)
        xs.push_back(rayleigh_quantile(th, (double(i) - 0.5) / double(n)));
    const auto ks = ks_test(xs, th);
    CHECK(ks.statistic == Approx(0.5 / double(n)).epsilon(1e-12));
}

TEST_CASE("KS distance is invariant under rescaling with refit") {
    Rng rng(33);
    std::vector<double> xs;
    for (int i = 0; i < 80; ++i) xs.push_back(rayleigh_sample({1.3}, rng));
    const double d0 = ks_test(xs).statistic;
    std::vector<double> scaled;
    for (double v : xs) scaled.push_back(7.5 * v);
    CHECK(ks_test(scaled).statistic == Approx(d0).epsilon(1e-12));
}

TEST_CASE("kolmogorov tail agrees with reference values") {
    CHECK(kolmogorov_sf(0.3) == Approx(0.999990694198665).margin(1e-9));
    CHECK(kolmogorov_sf(0.5) == Approx(0.963945243664875).margin(1e-10));
    CHECK(kolmogorov_sf(0.8) == Approx(0.544142411574198).margin(1e-10));
    CHECK(kolmogorov_sf(1.0) == Approx(0.269999671677355).margin(1e-10));
    CHECK(kolmogorov_sf(1.5) == Approx(0.0222179626165251).margin(1e-10));
    CHECK(kolmogorov_sf(2.0) == Approx(0.000670925255779695).margin(1e-12));
    CHECK(kolmogorov_sf(0.0) == 1.0);
}

TEST_CASE("p-value is nonincreasing in the distance") {
    for (double t = 0.05; t < 2.5; t += 0.05)
        CHECK(kolmogorov_sf(t + 0.05) <= kolmogorov_sf(t) + 1e-12);
}
