#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "bpre/bpre.hpp"
#include "fixtures.hpp"

using namespace bpre;
using Catch::Approx;

TEST_CASE("gamma_k values", "[small_value]") {
    const auto& m2 = fixtures::model_2env();
    CHECK(gamma_k(m2, 1) == Approx(0.35).epsilon(1e-15));
    CHECK(gamma_k(m2, 2) == Approx(0.145).epsilon(1e-15));
    CHECK(gamma_k(fixtures::geo_half(), 1) == Approx(0.5).margin(1e-10));
    CHECK_THROWS_AS(gamma_k(m2, 0), Error);

    // strictly decreasing when some p_1 lies in (0,1)
    double prev = gamma_k(m2, 1);
    for (int k = 2; k <= 8; ++k) {
        const double g = gamma_k(m2, k);
        CHECK(g < prev);
        prev = g;
    }
}

TEST_CASE("q-table recurrence", "[small_value]") {
    const auto& gw = fixtures::gw_half();
    const TruncatedKernel kernel = annealed_kernel(gw, 256);
    const QTable table = q_table(kernel, gw, 1, 200);

    CHECK(table.at(1) == 1.0);
    CHECK(table.at(2) == Approx(2.0).epsilon(1e-13));           // 0.5 / (0.5 - 0.25)
    CHECK(table.at(3) == Approx(8.0 / 3.0).epsilon(1e-12));
    CHECK(table.at(4) == Approx(24.0 / 7.0).epsilon(1e-12));

    const auto& m2 = fixtures::model_2env();
    const TruncatedKernel kernel2 = annealed_kernel(m2, 256);
    const QTable table2 = q_table(kernel2, m2, 1, 200);
    CHECK(table2.at(1) == 1.0);
    CHECK(table2.at(2) == Approx(0.65 / 0.205).epsilon(1e-13));

    const QTable from_two = q_table(kernel2, m2, 2, 64);
    CHECK(from_two.at(2) == 1.0);
    CHECK(from_two.at(1) == 0.0);
}

TEST_CASE("recurrence residual below 1e-10", "[small_value]") {
    const auto& m2 = fixtures::model_2env();
    const TruncatedKernel kernel = annealed_kernel(m2, 512);
    const QTable table = q_table(kernel, m2, 1, 500);
    const double gk = gamma_k(m2, 1);
    for (int j = 1; j <= 500; ++j) {
        double rhs = 0.0;
        for (int i = 1; i <= j; ++i) {
            const double pij = kernel.p(i, j);
            if (pij != 0.0) rhs += pij * table.at(i);
        }
        CHECK(std::abs(gk * table.at(j) - rhs) <= 1e-10 * std::max(1.0, table.at(j)));
    }
}

TEST_CASE("non-accessible states get q = 0", "[small_value]") {
    // support {1,3}: from one individual the population stays odd forever
    const auto model = build_environment({{1.0, {{1, 0.5}, {3, 0.5}}}}, "odd-steps");
    const TruncatedKernel kernel = annealed_kernel(model, 64);
    const QTable table = q_table(kernel, model, 1, 32);
    CHECK(table.accessible[1]);
    CHECK_FALSE(table.accessible[2]);
    CHECK(table.accessible[3]);
    CHECK(table.at(2) == 0.0);
    CHECK(table.at(3) > 0.0);

    CHECK_THROWS_AS(verify_monotone_limit(kernel, model, 1, 2, 10), Error);
}

TEST_CASE("degenerate denominator is refused", "[small_value]") {
    // p_1 so close to 1 that gamma_1 - p(2,2) vanishes numerically
    const auto model =
        build_environment({{1.0, {{1, 1.0 - 1e-13}, {2, 1e-13}}}}, "nearly-degenerate");
    const TruncatedKernel kernel = annealed_kernel(model, 16);
    CHECK_THROWS_MATCHES(q_table(kernel, model, 1, 8), Error,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "DegenerateDenominator")));
}

TEST_CASE("monotone limit of P(Z_n = j) / gamma^n", "[small_value]") {
    const auto& gw = fixtures::gw_half();
    const TruncatedKernel kernel = annealed_kernel(gw, 64);

    const MonotoneLimit stay = verify_monotone_limit(kernel, gw, 1, 1, 30);
    for (double v : stay.ratios) CHECK(v == Approx(1.0).margin(1e-12));

    const MonotoneLimit two = verify_monotone_limit(kernel, gw, 1, 2, 40);
    CHECK(two.q_reference == Approx(2.0).epsilon(1e-12));
    CHECK(two.gap < 1e-6);

    const auto& m2 = fixtures::model_2env();
    const TruncatedKernel kernel2 = annealed_kernel(m2, 64);
    const MonotoneLimit limit2 = verify_monotone_limit(kernel2, m2, 1, 2, 60);
    CHECK(limit2.ratios.back() == Approx(0.65 / 0.205).margin(1e-5));
    for (int j = 3; j <= 10; ++j)
        CHECK(verify_monotone_limit(kernel2, m2, 1, j, 60).gap < 1e-3);
}

TEST_CASE("Q series evaluation and truncation bound", "[small_value]") {
    const auto& gw = fixtures::gw_half();
    const TruncatedKernel kernel = annealed_kernel(gw, 512);
    const QTable table = q_table(kernel, gw, 1, 400);

    CHECK(Q_eval(table, 0.0).value == 0.0);
    const SeriesValue at_01 = Q_eval(table, 0.1);
    CHECK(at_01.value == Approx(0.1230543408).epsilon(1e-8));
    CHECK(at_01.value > 0.1 + 2 * 0.01);  // leading terms t + 2 t^2
    CHECK(at_01.tail_bound < 1e-12);
    CHECK(at_01.bound_is_heuristic);
    CHECK_THROWS_AS(Q_eval(table, 1.0), Error);
}

TEST_CASE("functional equation residual", "[small_value]") {
    const auto& gw = fixtures::gw_half();
    const TruncatedKernel kernel = annealed_kernel(gw, 512);
    const QTable gw200 = q_table(kernel, gw, 1, 200);
    CHECK(functional_equation_residual(gw200, gw, 0.0) == 0.0);
    CHECK(functional_equation_residual(gw200, gw, 0.3) < 1e-8);

    const auto& m2 = fixtures::model_2env();
    const TruncatedKernel kernel2 = annealed_kernel(m2, 512);
    const QTable env400 = q_table(kernel2, m2, 1, 400);
    CHECK(functional_equation_residual(env400, m2, 0.5) < 1e-6);
}

TEST_CASE("series summability above the critical order", "[small_value]") {
    // partial sums of j^{-r} q_{1,j} settle: the tail past J = 2000
    // contributes under 1% for r comfortably above r_1
    const auto& gw = fixtures::gw_half();
    const QTable table = q_table(fixtures::gw_kernel_4096(), gw, 1, 2000);
    const double r = 3.0;
    double partial_half = 0.0, partial_full = 0.0;
    for (int j = 1; j <= 1000; ++j)
        partial_half += table.at(j) * std::pow(static_cast<double>(j), -r);
    for (int j = 1; j <= 2000; ++j)
        partial_full += table.at(j) * std::pow(static_cast<double>(j), -r);
    CHECK(partial_full - partial_half < 0.01 * partial_full);
}
