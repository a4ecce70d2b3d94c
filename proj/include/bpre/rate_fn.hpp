#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "bpre/env_model.hpp"
#include "bpre/errors.hpp"
#include "bpre/exact_engine.hpp"
#include "bpre/small_value.hpp"

namespace bpre {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kRootResidual = 1e-12;

struct LogLaplace {
    double value = 0.0;
    double derivative = 0.0;
};

// Lambda(lambda) = log E[m_0^lambda] and its derivative, shifted by the
// largest exponent so extreme tilts stay finite.
inline LogLaplace log_laplace(const EnvironmentModel& model, double lambda) {
    double shift = -kInf;
    for (int s = 0; s < model.size(); ++s)
        shift = std::max(shift, lambda * model.law(s).log_mean());
    double num = 0.0, den = 0.0;
    for (int s = 0; s < model.size(); ++s) {
        const double x = model.law(s).log_mean();
        const double w = model.weight(s) * std::exp(lambda * x - shift);
        den += w;
        num += w * x;
    }
    return LogLaplace{std::log(den) + shift, num / den};
}

// c_r = E[m_0^{-r}] = exp(Lambda(-r)); strictly decreasing in r when mu > 0.
inline double c_r(const EnvironmentModel& model, double r) {
    require(r >= 0.0, errc::domain_error, "c_r needs r >= 0");
    return std::exp(log_laplace(model, -r).value);
}

// Deterministic X means every state has the same mean: the Galton-Watson
// degenerate case, where Lambda* collapses to a point.
inline bool deterministic_log_mean(const EnvironmentModel& model) {
    double lo = kInf, hi = -kInf;
    for (int s = 0; s < model.size(); ++s) {
        lo = std::min(lo, model.law(s).log_mean());
        hi = std::max(hi, model.law(s).log_mean());
    }
    return hi - lo <= 1e-14 * std::max(1.0, std::abs(hi));
}

inline double min_log_mean(const EnvironmentModel& model) {
    double lo = kInf;
    for (int s = 0; s < model.size(); ++s) lo = std::min(lo, model.law(s).log_mean());
    return lo;
}

// Unique r with c_r = gamma_k; +inf when gamma_k = 0 (no state has p_1 > 0).
inline double solve_r_k(const EnvironmentModel& model, int k) {
    require(k >= 1, errc::domain_error, "k must be >= 1");
    const double gk = gamma_k(model, k);
    if (gk <= 0.0) return kInf;
    double lo = 0.0, hi = 1.0;
    while (c_r(model, hi) > gk) {
        hi *= 2.0;
        require(hi < 1e9, errc::degenerate_denominator, "r_k bracket expansion failed");
    }
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double val = c_r(model, mid);
        if (std::abs(val - gk) < kRootResidual) return mid;
        (val > gk ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Unique positive root of E[p_1^k m_0^a] = 1; +inf when the left side never
// reaches 1 (gamma_k = 0, or only mean-1 states carry p_1 mass).
inline double solve_a_k(const EnvironmentModel& model, int k) {
    require(k >= 1, errc::domain_error, "k must be >= 1");
    auto lhs = [&](double a) {
        double acc = 0.0;
        for (int s = 0; s < model.size(); ++s)
            acc += model.weight(s) * std::pow(model.law(s).p1(), k) *
                   std::pow(model.law(s).mean(), a);
        return acc;
    };
    if (lhs(0.0) <= 0.0) return kInf;
    double lo = 0.0, hi = 1.0;
    while (lhs(hi) < 1.0) {
        hi *= 2.0;
        if (hi >= 1e9) return kInf;
    }
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double val = lhs(mid);
        if (std::abs(val - 1.0) < kRootResidual) return mid;
        (val < 1.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct LegendrePoint {
    double value = 0.0;         // Lambda*(theta); +inf off the reachable range
    double lambda_theta = 0.0;  // argmax, meaningful only when value is finite
};

// Lambda*(theta) = sup_{lambda <= 0} (lambda theta - Lambda(lambda)), solved
// through Lambda'(lambda) = theta (Lambda' is increasing).
inline LegendrePoint legendre(const EnvironmentModel& model, double theta) {
    const double mu = model.mu();
    require(theta > 0.0 && theta < mu, errc::domain_error, "theta outside (0, E[X])");
    if (deterministic_log_mean(model)) {
        if (std::abs(theta - mu) <= 1e-12 * mu) return LegendrePoint{0.0, 0.0};
        return LegendrePoint{kInf, -kInf};
    }
    if (theta <= min_log_mean(model)) return LegendrePoint{kInf, -kInf};
    double lo = -1.0, hi = 0.0;
    while (log_laplace(model, lo).derivative > theta) {
        lo *= 2.0;
        if (lo < -1e6) return LegendrePoint{kInf, -kInf};
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (log_laplace(model, mid).derivative < theta ? lo : hi) = mid;
    }
    const double lambda_theta = 0.5 * (lo + hi);
    const LogLaplace L = log_laplace(model, lambda_theta);
    return LegendrePoint{lambda_theta * theta - L.value, lambda_theta};
}

// Critical exponents and thresholds for a model and initial size k.
struct CriticalConstants {
    int k = 1;
    double gamma_k = 0.0;
    double r_k = kInf;
    double a_k = kInf;
    double theta_k = 0.0;  // Lambda'(-r_k)
    double mu = 0.0;
    double rho_k = kInf;   // -log gamma_k
};

inline CriticalConstants critical_constants(const EnvironmentModel& model, int k) {
    CriticalConstants c;
    c.k = k;
    c.gamma_k = gamma_k(model, k);
    c.r_k = solve_r_k(model, k);
    c.a_k = solve_a_k(model, k);
    c.mu = model.mu();
    c.rho_k = c.gamma_k > 0.0 ? -std::log(c.gamma_k) : kInf;
    c.theta_k = std::isfinite(c.r_k) ? log_laplace(model, -c.r_k).derivative : c.mu;
    return c;
}

// Normalizer A_{k,n}(r) of the harmonic-moment equivalent: gamma_k^n above
// the critical order, n gamma_k^n at it, c_r^n below.
inline double a_kn(const EnvironmentModel& model, const CriticalConstants& constants, int n,
                   double r) {
    const double rk = constants.r_k;
    if (std::isfinite(rk) && std::abs(r - rk) <= 1e-9 * std::max(1.0, rk))
        return static_cast<double>(n) * std::pow(constants.gamma_k, n);
    if (r > rk) return std::pow(constants.gamma_k, n);
    return std::pow(c_r(model, r), n);
}

enum class RateRegime { linear, smooth };

// One point of the lower-deviation rate function, carrying both the direct
// form chi*_k and the variational form I_k for cross-validation.
struct RatePoint {
    double theta = 0.0;
    double chi_star = 0.0;
    double lambda_star = 0.0;   // Lambda*(theta), +inf below the support floor
    double i_k = 0.0;
    double lambda_theta = 0.0;  // argmax of the chi_k conjugate
    RateRegime regime = RateRegime::linear;
};

// chi*_k(theta): linear -r_k theta - log gamma_k below theta_k, Lambda*
// above; continuous at the junction.
inline RatePoint chi_star(const EnvironmentModel& model, const CriticalConstants& constants,
                          double theta) {
    require(theta > 0.0 && theta < constants.mu, errc::domain_error, "theta outside (0, E[X])");
    require(std::isfinite(constants.r_k), errc::infinite_critical,
            "r_k = +inf: chi*_k reduces to Lambda*");
    RatePoint pt;
    pt.theta = theta;
    const LegendrePoint lp = legendre(model, theta);
    pt.lambda_star = lp.value;
    if (theta < constants.theta_k) {
        pt.regime = RateRegime::linear;
        pt.chi_star = -constants.r_k * theta + constants.rho_k;
        pt.lambda_theta = -constants.r_k;
    } else {
        pt.regime = RateRegime::smooth;
        pt.chi_star = lp.value;
        pt.lambda_theta = lp.lambda_theta;
    }
    return pt;
}

// theta_k^*: minimizer of (rho_k - Lambda*(theta))/theta on (0, E[X]).
// Grid scan plus ternary refinement; the paper proves it coincides with
// theta_k, which the tests cross-check.
inline double bansaye_theta_star(const EnvironmentModel& model,
                                 const CriticalConstants& constants, int grid_points = 512) {
    if (deterministic_log_mean(model)) return constants.mu;
    const double mu = constants.mu;
    auto objective = [&](double theta) {
        const double ls = legendre(model, theta).value;
        return std::isfinite(ls) ? (constants.rho_k - ls) / theta : kInf;
    };
    const double lo_edge = 0.01 * mu, hi_edge = 0.99 * mu;
    double best_theta = constants.theta_k;
    double best = kInf;
    std::vector<double> grid(static_cast<std::size_t>(grid_points));
    for (int i = 0; i < grid_points; ++i) {
        const double theta =
            lo_edge + (hi_edge - lo_edge) * static_cast<double>(i) / (grid_points - 1);
        grid[static_cast<std::size_t>(i)] = theta;
        const double val = objective(theta);
        if (val < best) {
            best = val;
            best_theta = theta;
        }
    }
    // bracket around the grid argmin, then ternary search
    double lo = std::max(lo_edge, best_theta - (hi_edge - lo_edge) / (grid_points - 1));
    double hi = std::min(hi_edge, best_theta + (hi_edge - lo_edge) / (grid_points - 1));
    for (int it = 0; it < 200; ++it) {
        const double m1 = lo + (hi - lo) / 3.0;
        const double m2 = hi - (hi - lo) / 3.0;
        if (objective(m1) <= objective(m2))
            hi = m2;
        else
            lo = m1;
    }
    return 0.5 * (lo + hi);
}

// I_k(theta): the variational rate-function form, evaluated from an
// independently located theta_k^*.
inline double bansaye_rate(const EnvironmentModel& model, const CriticalConstants& constants,
                           double theta) {
    require(theta > 0.0 && theta < constants.mu, errc::domain_error, "theta outside (0, E[X])");
    require(std::isfinite(constants.r_k), errc::infinite_critical,
            "r_k = +inf: I_k reduces to Lambda*");
    const double theta_star = bansaye_theta_star(model, constants);
    if (theta <= theta_star) {
        const double ls_star = deterministic_log_mean(model) && theta_star == constants.mu
                                   ? 0.0
                                   : legendre(model, theta_star).value;
        return constants.rho_k * (1.0 - theta / theta_star) + (theta / theta_star) * ls_star;
    }
    return legendre(model, theta).value;
}

// inf over a log-spaced r grid of upper(E_k[Z_n^{-r}]) e^{theta r n}; an
// upper bound on P_k(Z_n <= e^{theta n}) by Markov's inequality, whatever
// the grid.
inline double markov_bound(const CriticalConstants& constants, double theta, int n,
                           const std::function<Interval(double)>& harmonic_oracle,
                           int grid_points = 64) {
    require(theta > 0.0 && theta < constants.mu, errc::domain_error, "theta outside (0, E[X])");
    if (n == 0) return 1.0;
    const double r_hi = std::isfinite(constants.r_k) ? 4.0 * constants.r_k : 16.0;
    const double r_lo = 0.01;
    double best = kInf;
    for (int i = 0; i < grid_points; ++i) {
        const double r =
            r_lo * std::pow(r_hi / r_lo, static_cast<double>(i) / (grid_points - 1));
        const double value =
            harmonic_oracle(r).upper * std::exp(theta * r * static_cast<double>(n));
        best = std::min(best, value);
    }
    return best;
}

inline double markov_bound(const CriticalConstants& constants, const TruncatedKernel& kernel,
                           int k, double theta, int n) {
    const PmfVector pmf = distribution_of_Zn(kernel, k, n);
    return markov_bound(constants, theta, n,
                        [&](double r) { return harmonic_moment(pmf, r); });
}

}  // namespace bpre
