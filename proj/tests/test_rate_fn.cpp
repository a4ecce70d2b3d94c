#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "bpre/bpre.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace bpre;
using Catch::Approx;

TEST_CASE("log-Laplace transform and derivative", "[rate_fn]") {
    const auto& m2 = fixtures::model_2env();
    CHECK(log_laplace(m2, 0.0).value == Approx(0.0).margin(1e-15));
    CHECK(log_laplace(m2, 0.0).derivative == Approx(m2.mu()).epsilon(1e-12));
    CHECK(log_laplace(m2, -1.0).value == Approx(std::log(11.0 / 18.0)).epsilon(1e-12));

    const auto& gw = fixtures::gw_half();
    for (double lambda : {-7.0, -2.0, -0.5, 0.0, 1.5})
        CHECK(log_laplace(gw, lambda).value == Approx(lambda * std::log(1.5)).margin(1e-12));

    // convexity: second differences on a lambda grid
    double prev = log_laplace(m2, -6.0).value, prev_diff = 0.0;
    bool first = true;
    for (int i = 1; i <= 120; ++i) {
        const double lam = -6.0 + 0.1 * i;
        const double v = log_laplace(m2, lam).value;
        const double diff = v - prev;
        if (!first) CHECK(diff - prev_diff >= -1e-12);
        first = false;
        prev_diff = diff;
        prev = v;
    }
}

TEST_CASE("c_r values", "[rate_fn]") {
    const auto& m2 = fixtures::model_2env();
    CHECK(c_r(m2, 1.0) == Approx(11.0 / 18.0).epsilon(1e-12));
    CHECK(c_r(fixtures::geo_half(), 1.0) == Approx(0.5).margin(1e-9));
    CHECK(c_r(m2, 1e-12) == Approx(1.0).margin(1e-9));
    for (double r : {0.25, 0.5, 1.0, 2.0, 4.0})
        CHECK(std::exp(log_laplace(m2, -r).value) == Approx(c_r(m2, r)).epsilon(1e-12));
}

TEST_CASE("critical exponent r_k", "[rate_fn]") {
    CHECK(std::abs(solve_r_k(fixtures::geo_half(), 1) - 1.0) < 1e-8);

    const double gw_r1 = solve_r_k(fixtures::gw_half(), 1);
    CHECK(gw_r1 == Approx(std::log(2.0) / std::log(1.5)).margin(1e-10));

    const auto& m2 = fixtures::model_2env();
    const double r1 = solve_r_k(m2, 1);
    CHECK(r1 > 2.14);
    CHECK(r1 < 2.16);
    CHECK(std::abs(c_r(m2, r1) - 0.35) < 1e-12);

    const double r2 = solve_r_k(m2, 2);
    CHECK(r2 > r1);
    CHECK(std::abs(c_r(m2, r2) - gamma_k(m2, 2)) < 1e-12);

    // no state keeps the population in place => infinite critical order
    const auto no_stay = build_environment({{1.0, {{2, 1.0}}}}, "always-doubles");
    CHECK(std::isinf(solve_r_k(no_stay, 1)));
}

TEST_CASE("critical exponent a_k for the limit variable", "[rate_fn]") {
    const auto& gw = fixtures::gw_half();
    const double r1 = std::log(2.0) / std::log(1.5);
    CHECK(solve_a_k(gw, 1) == Approx(r1).margin(1e-10));
    CHECK(solve_a_k(gw, 2) == Approx(2.0 * r1).margin(1e-10));

    const auto& m2 = fixtures::model_2env();
    const double a1 = solve_a_k(m2, 1);
    double lhs = 0.0;
    lhs += 0.5 * 0.5 * std::pow(1.5, a1);
    lhs += 0.5 * 0.2 * std::pow(1.8, a1);
    CHECK(lhs == Approx(1.0).margin(1e-10));
    CHECK(std::abs(a1 - solve_r_k(m2, 1)) > 1e-3);  // generally different in random environments
}

TEST_CASE("Legendre transform", "[rate_fn]") {
    const auto& m2 = fixtures::model_2env();
    const double mu = m2.mu();

    const LegendrePoint near_mu = legendre(m2, mu * (1.0 - 1e-9));
    CHECK(near_mu.value == Approx(0.0).margin(1e-8));
    CHECK(near_mu.lambda_theta == Approx(0.0).margin(1e-6));

    CHECK(std::isinf(legendre(fixtures::gw_half(), 0.2).value));

    const LegendrePoint mid = legendre(m2, 0.45);
    CHECK(std::isfinite(mid.value));
    CHECK(mid.value > 0.0);
    CHECK(mid.lambda_theta < 0.0);

    // dense-grid supremum oracle within 1e-8
    double sup = -kInf;
    for (int i = 0; i <= 200000; ++i) {
        const double lam = -20.0 + 19.0 * static_cast<double>(i) / 200000.0;
        sup = std::max(sup, lam * 0.45 - log_laplace(m2, lam).value);
    }
    CHECK(mid.value == Approx(sup).margin(1e-8));

    // below the support floor of X the transform is infinite
    CHECK(std::isinf(legendre(m2, 0.3).value));
    CHECK_THROWS_AS(legendre(m2, 0.0), Error);
    CHECK_THROWS_AS(legendre(m2, mu), Error);
}

TEST_CASE("critical constants bundle", "[rate_fn]") {
    const auto& m2 = fixtures::model_2env();
    const CriticalConstants c = critical_constants(m2, 1);
    CHECK(c.gamma_k == Approx(0.35).epsilon(1e-15));
    CHECK(c.rho_k == Approx(-std::log(0.35)).epsilon(1e-12));
    CHECK(c.theta_k == Approx(0.4789646877873112).margin(1e-9));
    CHECK(c.theta_k > 0.0);
    CHECK(c.theta_k < c.mu);
    CHECK(std::abs(c_r(m2, c.r_k) - c.gamma_k) < 1e-10);
}

TEST_CASE("chi* piecewise rate function", "[rate_fn]") {
    const auto& gw = fixtures::gw_half();
    const CriticalConstants cgw = critical_constants(gw, 1);
    const double r1 = std::log(2.0) / std::log(1.5);

    const RatePoint low = chi_star(gw, cgw, 0.2);
    CHECK(low.regime == RateRegime::linear);
    CHECK(low.chi_star == Approx(-r1 * 0.2 + std::log(2.0)).margin(1e-10));
    CHECK(low.lambda_theta == Approx(-r1).margin(1e-9));

    const RatePoint near_mu = chi_star(gw, cgw, gw.mu() * (1.0 - 1e-10));
    CHECK(near_mu.chi_star == Approx(0.0).margin(1e-9));

    const auto& m2 = fixtures::model_2env();
    const CriticalConstants c2 = critical_constants(m2, 1);
    const double eps = 1e-9;
    const double left = -c2.r_k * (c2.theta_k - eps) + c2.rho_k;
    const double right = legendre(m2, c2.theta_k + eps).value;
    CHECK(std::abs(left - right) < 1e-7);  // continuity across theta_k

    const RatePoint smooth = chi_star(m2, c2, 0.49);
    CHECK(smooth.regime == RateRegime::smooth);
    CHECK(smooth.lambda_theta >= -c2.r_k - 1e-9);
    CHECK(smooth.lambda_theta <= 0.0);
}

TEST_CASE("variational rate function coincides with chi*", "[rate_fn]") {
    const auto& m2 = fixtures::model_2env();
    const CriticalConstants c = critical_constants(m2, 1);

    const double theta_star = bansaye_theta_star(m2, c);
    CHECK(std::abs(theta_star - c.theta_k) < 1e-6);

    double max_gap = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double theta = c.mu * (0.02 + 0.96 * static_cast<double>(i) / 99.0);
        const double gap =
            std::abs(chi_star(m2, c, theta).chi_star - bansaye_rate(m2, c, theta));
        max_gap = std::max(max_gap, gap);
    }
    CHECK(max_gap < 1e-8);

    // constant environment: everything is the linear branch
    const auto& gw = fixtures::gw_half();
    const CriticalConstants cgw = critical_constants(gw, 1);
    for (double theta : {0.05, 0.15, 0.3, 0.39}) {
        CHECK(bansaye_rate(gw, cgw, theta) ==
              Approx(chi_star(gw, cgw, theta).chi_star).margin(1e-10));
        CHECK(chi_star(gw, cgw, theta).regime == RateRegime::linear);
    }
}

TEST_CASE("Markov bound dominates the exact tail", "[rate_fn]") {
    const auto& gw = fixtures::gw_half();
    const CriticalConstants c = critical_constants(gw, 1);
    const TruncatedKernel kernel = annealed_kernel(gw, 512);

    for (int n : {4, 8, 12}) {
        for (double theta : {0.1, 0.2, 0.3}) {
            const double bound = markov_bound(c, kernel, 1, theta, n);
            const PmfVector pmf = distribution_of_Zn(kernel, 1, n);
            double exact = 0.0;
            const double threshold = std::exp(theta * n);
            for (int j = 1; j <= static_cast<int>(threshold) && j <= 512; ++j)
                exact += pmf.at(j);
            CHECK(bound > exact);
        }
    }
    CHECK(markov_bound(c, kernel, 1, 0.2, 0) == 1.0);
}

TEST_CASE("A_{k,n} regimes", "[rate_fn]") {
    const auto& gw = fixtures::gw_half();
    const CriticalConstants c = critical_constants(gw, 1);
    CHECK(a_kn(gw, c, 5, 1.0) == Approx(std::pow(2.0 / 3.0, 5)).epsilon(1e-12));
    CHECK(a_kn(gw, c, 5, 3.0) == Approx(std::pow(0.5, 5)).epsilon(1e-12));
    CHECK(a_kn(gw, c, 5, c.r_k) == Approx(5.0 * std::pow(0.5, 5)).epsilon(1e-12));
    CHECK(a_kn(gw, c, 6, 0.5) == Approx(std::pow(std::pow(1.5, -0.5), 6)).epsilon(1e-12));
}
