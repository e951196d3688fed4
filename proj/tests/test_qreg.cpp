#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "qdrl/distribution.hpp"
#include "qdrl/quantile_loss.hpp"
#include "qdrl/rng.hpp"

using namespace qdrl;

TEST_CASE("qr_loss pinball values") {
    CHECK(qr_loss(1.0, 0.25) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(qr_loss(-1.0, 0.25) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(qr_loss(2.0, 0.9) == doctest::Approx(1.8).epsilon(1e-15));
    CHECK(qr_loss(-2.0, 0.9) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(qr_loss(0.0, 0.5) == 0.0);
    CHECK(qr_loss(3.0, 0.5) == qr_loss(-3.0, 0.5));  // symmetric at the median
    CHECK_THROWS_AS(qr_loss(1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(qr_loss(1.0, 1.0), std::invalid_argument);
    for (double u : {-2.0, -0.5, 0.3, 4.0})
        for (double tau : {0.1, 0.5, 0.9}) CHECK(qr_loss(u, tau) >= 0.0);
}

TEST_CASE("huber transitions from quadratic to linear") {
    CHECK(huber(0.5, 1.0) == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(huber(2.0, 1.0) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(huber(-2.0, 1.0) == doctest::Approx(1.5).epsilon(1e-15));
    // both branches agree at the threshold
    CHECK(huber(1.0, 1.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(huber(1.0 + 1e-9, 1.0) == doctest::Approx(0.5).epsilon(1e-7));
    CHECK_THROWS_AS(huber(1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(huber(1.0, -1.0), std::invalid_argument);
}

TEST_CASE("quantile_huber weights huber asymmetrically and recovers qr_loss") {
    CHECK(quantile_huber(-2.0, 0.25, 1.0) == doctest::Approx(0.75 * 1.5).epsilon(1e-15));
    CHECK(quantile_huber(1.0, 0.25, 0.5) ==
          doctest::Approx(0.25 * huber(1.0, 0.5)).epsilon(1e-15));
    for (double u : {-2.0, -0.5, 0.0, 0.3, 4.0})
        for (double tau : {0.1, 0.5, 0.9}) {
            CHECK(quantile_huber(u, tau, 0.0) == qr_loss(u, tau));
            // the asymmetric weight multiplies the piecewise huber values
            const double weight = std::abs(tau - (u < 0.0 ? 1.0 : 0.0));
            if (std::abs(u) <= 0.25)
                CHECK(quantile_huber(u, tau, 0.25) ==
                      doctest::Approx(weight * 0.5 * u * u).epsilon(1e-15));
            else
                CHECK(quantile_huber(u, tau, 0.25) ==
                      doctest::Approx(weight * 0.25 * (std::abs(u) - 0.125)).epsilon(1e-15));
        }
    CHECK(quantile_huber(2.0, 0.5, 1.0) == doctest::Approx(0.5 * huber(2.0, 1.0)).epsilon(1e-15));
    CHECK_THROWS_AS(quantile_huber(1.0, 0.5, -0.5), std::invalid_argument);
}

TEST_CASE("qr_grad branch values") {
    // kappa = 0: the subgradient of the pinball loss in theta
    CHECK(qr_grad(2.0, 0.3, 0.0) == doctest::Approx(-0.3).epsilon(1e-15));
    CHECK(qr_grad(-1.0, 0.3, 0.0) == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(qr_grad(0.0, 0.3, 0.0) == doctest::Approx(-0.3).epsilon(1e-15));
    // kappa = 1
    CHECK(qr_grad(0.5, 0.3, 1.0) == doctest::Approx(-0.15).epsilon(1e-15));
    CHECK(qr_grad(-0.5, 0.3, 1.0) == doctest::Approx(0.35).epsilon(1e-15));
    CHECK(qr_grad(3.0, 0.3, 1.0) == doctest::Approx(-0.3).epsilon(1e-15));
    CHECK(qr_grad(-3.0, 0.3, 1.0) == doctest::Approx(0.7).epsilon(1e-15));
    CHECK_THROWS_AS(qr_grad(1.0, 0.5, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(qr_grad(1.0, 1.5, 0.0), std::invalid_argument);
}

TEST_CASE("qr_grad matches central differences of the loss in theta") {
    constexpr double kStep = 1e-6;
    for (double u : {-2.3, -0.7, 0.4, 1.9})
        for (double tau : {0.1, 0.5, 0.9})
            for (double kappa : {0.0, 0.5, 1.0, 2.0}) {
                if (std::abs(std::abs(u) - kappa) < 1e-3) continue;  // avoid the seam
                // L(theta) = loss(z - theta); probe theta around z - u
                const double fd = (quantile_huber(u - kStep, tau, kappa) -
                                   quantile_huber(u + kStep, tau, kappa)) /
                                  (2.0 * kStep);
                CHECK(qr_grad(u, tau, kappa) == doctest::Approx(fd).epsilon(1e-6));
            }
}

TEST_CASE("sgd_quantile finds a unique discrete quantile") {
    const FiniteDistribution source({{1.0, 0.5}, {3.0, 0.3}, {5.0, 0.2}});
    Rng rng(101);
    // tau = 0.75 crosses the CDF strictly inside the atom at 3
    const double theta = sgd_quantile(
        make_sampler(source), 0.75, 20000, [](std::size_t t) { return 0.5 / std::sqrt(t); },
        rng);
    CHECK(theta == doctest::Approx(3.0).epsilon(0.04));
}

TEST_CASE("sgd_quantile with huber smoothing finds a symmetric median") {
    const FiniteDistribution coin({{-1.0, 0.5}, {1.0, 0.5}});
    Rng rng(55);
    const double theta = sgd_quantile(
        make_sampler(coin), 0.5, 20000, [](std::size_t t) { return 0.5 / std::sqrt(t); }, rng,
        /*init=*/2.0, /*kappa=*/1.0);
    CHECK(std::abs(theta) < 0.1);
}

TEST_CASE("make_sampler reproduces the atom frequencies") {
    const FiniteDistribution d({{0.0, 0.3}, {1.0, 0.7}});
    const auto sampler = make_sampler(d);
    Rng rng(9);
    std::size_t ones = 0;
    constexpr std::size_t kDraws = 30000;
    for (std::size_t i = 0; i < kDraws; ++i)
        if (sampler(rng) == 1.0) ++ones;
    CHECK(std::abs(static_cast<double>(ones) - 0.7 * kDraws) <
          3.0 * std::sqrt(kDraws * 0.7 * 0.3));
}

TEST_CASE("biased_gradient_demo degenerates to near-zeros for n = m = 1") {
    Rng rng(1);
    // Every sample equals the single atom, so both central differences sit on
    // symmetric kinks and cancel up to floating-point roundoff in 1 +- h.
    const BiasedGradientReport report = biased_gradient_demo(1, 1, 1.0, 100, rng);
    CHECK(std::abs(report.wass_grad_mean) < 1e-8);
    CHECK(std::abs(report.qr_grad_mean) < 1e-8);
    CHECK(report.wass_grad_stderr < 1e-8);
    CHECK(report.qr_grad_stderr < 1e-8);
}

TEST_CASE("biased_gradient_demo separates the two estimators at n = m = 3") {
    Rng rng(424242);
    const BiasedGradientReport report = biased_gradient_demo(3, 3, 1.0, 4000, rng);
    CHECK(report.trials == 4000);
    CHECK(report.wass_grad_stderr > 0.0);
    CHECK(report.qr_grad_stderr > 0.0);
    // the sample-Wasserstein gradient concentrates near -8/81, the
    // quantile-regression gradient near 0
    CHECK(std::abs(report.wass_grad_mean - (-8.0 / 81.0)) < 5.0 * report.wass_grad_stderr);
    CHECK(std::abs(report.qr_grad_mean) < 5.0 * report.qr_grad_stderr);
    CHECK(report.wass_grad_mean < -5.0 * report.wass_grad_stderr);
}

TEST_CASE("biased_gradient_demo validates arguments and formats csv") {
    Rng rng(1);
    CHECK_THROWS_AS(biased_gradient_demo(0, 1, 1.0, 10, rng), std::invalid_argument);
    CHECK_THROWS_AS(biased_gradient_demo(1, 0, 1.0, 10, rng), std::invalid_argument);
    CHECK_THROWS_AS(biased_gradient_demo(1, 1, 1.0, 0, rng), std::invalid_argument);
    CHECK_THROWS_AS(biased_gradient_demo(1, 1, 0.5, 10, rng), std::invalid_argument);
    CHECK_THROWS_AS(
        biased_gradient_demo(1, 1, std::numeric_limits<double>::infinity(), 10, rng),
        std::invalid_argument);

    const BiasedGradientReport report = biased_gradient_demo(2, 2, 1.0, 10, rng);
    CHECK(report.csv_header() ==
          "N,m,p,trials,wass_grad_mean,wass_grad_stderr,qr_grad_mean,qr_grad_stderr");
    CHECK(report.csv_row().rfind("2,2,1,10,", 0) == 0);
}
