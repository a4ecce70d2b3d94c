#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bpre/env_model.hpp"
#include "bpre/errors.hpp"
#include "bpre/monte_carlo.hpp"
#include "bpre/parallel.hpp"
#include "bpre/rate_fn.hpp"
#include "bpre/rng.hpp"
#include "bpre/small_value.hpp"

namespace bpre {

// phi_xi(t) ~= g_n(exp(-t e^{-S_n})): the quenched Laplace transform of W,
// approximated at depth n via E_xi[e^{-t W_n}].
inline double quenched_laplace(const EnvPath& path, const EnvironmentModel& model, double t,
                               int n_laplace) {
    require(t >= 0.0, errc::domain_error, "Laplace argument must be >= 0");
    require(path.length() >= n_laplace, errc::path_too_short,
            "path shorter than the requested Laplace depth");
    double u = std::exp(-t * std::exp(-path.log_pi_at(n_laplace)));
    for (int j = n_laplace; j-- > 0;)
        u = model.law(path.states[static_cast<std::size_t>(j)]).pgf(u);
    return u;
}

// Same approximation evaluated on a whole grid at once (one pgf sweep).
inline void quenched_laplace_curve(const EnvPath& path, const EnvironmentModel& model,
                                   std::span<const double> ts, int n_laplace,
                                   std::span<double> out) {
    require(path.length() >= n_laplace, errc::path_too_short,
            "path shorter than the requested Laplace depth");
    const double scale = std::exp(-path.log_pi_at(n_laplace));
    for (std::size_t g = 0; g < ts.size(); ++g) out[g] = std::exp(-ts[g] * scale);
    for (int j = n_laplace; j-- > 0;) {
        const OffspringLaw& law = model.law(path.states[static_cast<std::size_t>(j)]);
        for (std::size_t g = 0; g < ts.size(); ++g) out[g] = law.pgf(out[g]);
    }
}

// Monte Carlo configuration for the limit-constant estimators.
struct LaplaceMcParams {
    long long paths = 100000;
    int n_laplace = 40;
    std::uint64_t seed = 1;
    int grid_points = 257;
    double t_min = 1e-6;
    int q_series_depth = 400;  // Q_k evaluation depth inside the identity check
};

// Averaged Laplace-transform curve of W (under the tilted law when
// lambda != 0), on a log-spaced grid with t = 0 prepended.
struct LaplaceApprox {
    int n_laplace = 0;
    std::vector<double> ts;
    std::vector<double> values;
};

namespace detail {

inline std::vector<double> log_spaced(double lo, double hi, int points) {
    std::vector<double> out(static_cast<std::size_t>(points));
    for (int g = 0; g < points; ++g)
        out[static_cast<std::size_t>(g)] =
            lo * std::pow(hi / lo, static_cast<double>(g) / (points - 1));
    return out;
}

// Trapezoid over an explicit grid.
inline double trapezoid(std::span<const double> xs, std::span<const double> ys) {
    double acc = 0.0;
    for (std::size_t i = 1; i < xs.size(); ++i)
        acc += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
    return acc;
}

// 16-point Gauss-Legendre rule on [-1, 1].
inline constexpr std::array<double, 8> kGlNodes = {
    0.0950125098376374, 0.2816035507792589, 0.4580167776572274, 0.6178762444026438,
    0.7554044083550030, 0.8656312023878318, 0.9445750230732326, 0.9894009349916499};
inline constexpr std::array<double, 8> kGlWeights = {
    0.1894506104550685, 0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
    0.1246289712555339, 0.0951585116824928, 0.0622535239386479, 0.0271524594117541};

template <typename Fn>
double gauss_legendre(double a, double b, Fn&& fn) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double acc = 0.0;
    for (std::size_t i = 0; i < kGlNodes.size(); ++i)
        acc += kGlWeights[i] * (fn(mid + half * kGlNodes[i]) + fn(mid - half * kGlNodes[i]));
    return acc * half;
}

// Per-path integrand of the sub/critical constants on the shared log grid.
struct PathIntegrand {
    const EnvironmentModel* model;
    int k = 1;
    double r = 1.0;
    bool crit = false;   // false: phi^k, true: Gbar_{k,1}(phi)
    double gamma = 0.0;  // gamma_k, used by the critical integrand

    double apply(double phi) const {
        if (!crit) return std::pow(phi, k);
        double g = 0.0;
        for (int s = 0; s < model->size(); ++s)
            g += model->weight(s) * std::pow(model->law(s).pgf(phi), k);
        return g - gamma * std::pow(phi, k);
    }
};

// Integral over [t_min, T] of integrand(phi(t)) t^{r-1} for one path, plus
// the analytic head on [0, t_min] where phi is flat.
inline double path_integral(const EnvPath& path, const EnvironmentModel& model,
                            const PathIntegrand& ig, std::span<const double> ts,
                            int n_laplace, std::vector<double>& phi_buf,
                            std::vector<double>& val_buf) {
    phi_buf.resize(ts.size());
    val_buf.resize(ts.size());
    quenched_laplace_curve(path, model, ts, n_laplace, phi_buf);
    for (std::size_t g = 0; g < ts.size(); ++g)
        val_buf[g] = ig.apply(phi_buf[g]) * std::pow(ts[g], ig.r - 1.0);
    const double head = ig.apply(phi_buf[0]) * std::pow(ts[0], ig.r) / ig.r;
    return head + trapezoid(ts, val_buf);
}

// Doubles T until the averaged integrand at T drops below 1e-4 of its peak,
// estimated on a deterministic pilot path sample.
inline double pilot_upper_limit(const EnvironmentModel& model, const TiltedEnvironment& tilt,
                                const PathIntegrand& ig, const LaplaceMcParams& params) {
    constexpr int kPilotPaths = 128;
    constexpr int kPilotGrid = 65;
    double T = 16.0;
    for (int round = 0; round < 40; ++round) {
        const auto ts = log_spaced(params.t_min, T, kPilotGrid);
        std::vector<double> mean(ts.size(), 0.0), phi(ts.size()), val(ts.size());
        for (int i = 0; i < kPilotPaths; ++i) {
            Rng rng = substream(params.seed ^ 0x9D2C5680AA55AA55ull,
                                static_cast<std::uint64_t>(i));
            const EnvPath path = sample_env_path(tilt, params.n_laplace, rng);
            quenched_laplace_curve(path, model, ts, params.n_laplace, phi);
            for (std::size_t g = 0; g < ts.size(); ++g)
                mean[g] += ig.apply(phi[g]) * std::pow(ts[g], ig.r - 1.0);
        }
        double peak = 0.0;
        for (double v : mean) peak = std::max(peak, v);
        if (mean.back() < 1e-4 * peak) return T;
        T *= 2.0;
    }
    return T;
}

// Power-law extrapolation of the tail beyond T, reported but never added.
inline double tail_estimate(std::span<const double> ts, std::span<const double> mean_vals) {
    const std::size_t n = ts.size();
    if (n < 8) return 0.0;
    const std::size_t a = n - 8, b = n - 1;
    if (mean_vals[a] <= 0.0 || mean_vals[b] <= 0.0) return 0.0;
    const double slope =
        std::log(mean_vals[b] / mean_vals[a]) / std::log(ts[b] / ts[a]);
    if (slope >= -1.0) return std::numeric_limits<double>::infinity();
    return -mean_vals[b] * ts[b] / (slope + 1.0);
}

}  // namespace detail

inline LaplaceApprox laplace_transform_curve(const EnvironmentModel& model, int k,
                                             double lambda, const LaplaceMcParams& params,
                                             double t_max = 64.0) {
    const TiltedEnvironment tilt(model, lambda);
    const auto ts = detail::log_spaced(params.t_min, t_max, params.grid_points);
    const long long nblocks = (params.paths + kMcBlockSize - 1) / kMcBlockSize;
    std::vector<std::vector<double>> partial(static_cast<std::size_t>(nblocks));
    parallel_for(static_cast<std::size_t>(nblocks), [&](std::size_t bi) {
        std::vector<double> acc(ts.size(), 0.0), phi(ts.size());
        const long long first = static_cast<long long>(bi) * kMcBlockSize;
        const long long stop = std::min(params.paths, first + kMcBlockSize);
        for (long long i = first; i < stop; ++i) {
            Rng rng = substream(params.seed, static_cast<std::uint64_t>(i));
            const EnvPath path = sample_env_path(tilt, params.n_laplace, rng);
            quenched_laplace_curve(path, model, ts, params.n_laplace, phi);
            for (std::size_t g = 0; g < ts.size(); ++g) acc[g] += std::pow(phi[g], k);
        }
        partial[bi] = std::move(acc);
    });
    LaplaceApprox out;
    out.n_laplace = params.n_laplace;
    out.ts.push_back(0.0);
    out.values.push_back(1.0);
    for (std::size_t g = 0; g < ts.size(); ++g) {
        double acc = 0.0;
        for (const auto& block : partial) acc += block[g];
        out.ts.push_back(ts[g]);
        out.values.push_back(acc / static_cast<double>(params.paths));
    }
    return out;
}

// One limit constant with its regime and error accounting.
struct ConstantEstimate {
    enum class Regime { sub, crit, super };
    Regime regime = Regime::sub;
    double value = 0.0;
    double error = 0.0;       // stderr (MC methods) or truncation bound (series)
    std::string method;
    double tail_estimate = 0.0;  // extrapolated quadrature tail, reported separately
};

// r > r_k: C(k,r) = sum_j q_{k,j} j^{-r}, cross-checked against the integral
// of Q_k(e^{-t}) t^{r-1} / Gamma(r).
inline ConstantEstimate constant_super(const QTable& table, double r, double r_k,
                                       double* integral_form = nullptr) {
    require(r > r_k, errc::regime_mismatch, "constant_super needs r > r_k");
    double series = 0.0;
    for (int j = table.k; j <= table.J; ++j)
        series += table.at(j) * std::pow(static_cast<double>(j), -r);
    // empirical-growth tail bound, same heuristic as Q_eval
    double growth = 1.0;
    if (table.J > table.k && table.at(table.J - 1) > 0.0)
        growth = table.at(table.J) / table.at(table.J - 1);
    const double last = table.at(table.J) * std::pow(static_cast<double>(table.J), -r);
    const double ratio = growth * std::pow(1.0 + 1.0 / table.J, -r);
    const double tail =
        ratio < 1.0 ? last * ratio / (1.0 - ratio) : std::numeric_limits<double>::infinity();
    require(tail < 1e-3 * series, errc::domain_error,
            "q-table too shallow: series tail ratio above 1e-3");

    if (integral_form != nullptr) {
        // quadrature of Q_k(e^-t) t^{r-1} on a log grid, from the same table
        const auto ts = detail::log_spaced(1e-8, 64.0, 2049);
        std::vector<double> vals(ts.size());
        for (std::size_t g = 0; g < ts.size(); ++g)
            vals[g] = Q_eval(table, std::exp(-ts[g])).value * std::pow(ts[g], r - 1.0);
        const double head = vals[0] / std::pow(ts[0], r - 1.0) * std::pow(ts[0], r) / r;
        *integral_form = (head + detail::trapezoid(ts, vals)) / std::tgamma(r);
    }
    return ConstantEstimate{ConstantEstimate::Regime::super, series, tail,
                            "q-series[J=" + std::to_string(table.J) + "]", 0.0};
}

// r < r_k: C(k,r) = E_k^{(r)}[W^{-r}] via tilted paths and the inverse-power
// integral of the Laplace transform.
inline ConstantEstimate constant_sub(const EnvironmentModel& model, int k, double r,
                                     const LaplaceMcParams& params) {
    const double r_k = solve_r_k(model, k);
    require(r < r_k, errc::regime_mismatch, "constant_sub needs r < r_k");
    require(r > 0.0, errc::domain_error, "order must be positive");
    const TiltedEnvironment tilt(model, -r);
    detail::PathIntegrand ig{&model, k, r, false, 0.0};
    const double T = detail::pilot_upper_limit(model, tilt, ig, params);
    const auto ts = detail::log_spaced(params.t_min, T, params.grid_points);

    std::vector<double> mean_curve(ts.size(), 0.0);
    const McEstimate integral = mc_run(params.paths, params.seed, -r, [&](Rng& rng, long long) {
        thread_local std::vector<double> phi_buf, val_buf;
        const EnvPath path = sample_env_path(tilt, params.n_laplace, rng);
        return detail::path_integral(path, model, ig, ts, params.n_laplace, phi_buf, val_buf);
    });
    // mean integrand curve for the tail report (pilot-grade accuracy)
    {
        std::vector<double> phi(ts.size());
        for (int i = 0; i < 128; ++i) {
            Rng rng = substream(params.seed ^ 0x5851F42D4C957F2Dull,
                                static_cast<std::uint64_t>(i));
            const EnvPath path = sample_env_path(tilt, params.n_laplace, rng);
            quenched_laplace_curve(path, model, ts, params.n_laplace, phi);
            for (std::size_t g = 0; g < ts.size(); ++g)
                mean_curve[g] += ig.apply(phi[g]) * std::pow(ts[g], r - 1.0) / 128.0;
        }
    }
    const double gamma_r = std::tgamma(r);
    ConstantEstimate out;
    out.regime = ConstantEstimate::Regime::sub;
    out.value = integral.mean / gamma_r;
    out.error = integral.std_error / gamma_r;
    out.tail_estimate = detail::tail_estimate(ts, mean_curve) / gamma_r;
    out.method = "tilted-mc[paths=" + std::to_string(params.paths) +
                 ",depth=" + std::to_string(params.n_laplace) + ",T=" + std::to_string(T) + "]";
    return out;
}

// r = r_k: C(k,r) = gamma_k^{-1} E^{(r)}[ integral of Gbar_{k,1}(phi_xi(t))
// t^{r-1} ] / Gamma(r).
inline ConstantEstimate constant_crit(const EnvironmentModel& model, int k,
                                      const LaplaceMcParams& params) {
    const double r_k = solve_r_k(model, k);
    require(std::isfinite(r_k), errc::infinite_critical, "r_k = +inf");
    const double gk = gamma_k(model, k);
    const TiltedEnvironment tilt(model, -r_k);
    detail::PathIntegrand ig{&model, k, r_k, true, gk};
    const double T = detail::pilot_upper_limit(model, tilt, ig, params);
    const auto ts = detail::log_spaced(params.t_min, T, params.grid_points);

    const McEstimate integral =
        mc_run(params.paths, params.seed, -r_k, [&](Rng& rng, long long) {
            thread_local std::vector<double> phi_buf, val_buf;
            const EnvPath path = sample_env_path(tilt, params.n_laplace, rng);
            return detail::path_integral(path, model, ig, ts, params.n_laplace, phi_buf,
                                         val_buf);
        });
    const double scale = gk * std::tgamma(r_k);
    ConstantEstimate out;
    out.regime = ConstantEstimate::Regime::crit;
    out.value = integral.mean / scale;
    out.error = integral.std_error / scale;
    out.method = "tilted-mc[paths=" + std::to_string(params.paths) +
                 ",depth=" + std::to_string(params.n_laplace) + ",T=" + std::to_string(T) + "]";
    return out;
}

// Both sides of the critical-constant identity, on common random numbers.
// `numeric_bound` propagates the deterministic error sources (quadrature
// grid, Laplace depth, tail truncation); for a constant environment the
// statistical error is exactly zero and the bound carries the test alone.
struct IdentityResult {
    double lhs = 0.0;
    double rhs = 0.0;
    double lhs_std_error = 0.0;
    double rhs_std_error = 0.0;
    double diff = 0.0;
    double diff_std_error = 0.0;
    double numeric_bound = 0.0;
    bool pass = false;  // |diff| <= 3 diff_std_error + numeric_bound
};

namespace detail {

// One path's lhs/rhs pair of the identity, at a chosen grid and depth.
struct IdentityEvaluator {
    const EnvironmentModel* model;
    const QTable* table;
    double r, gk;
    PathIntegrand lhs_ig;
    std::vector<double> ts;
    int n_laplace;

    std::array<double, 2> operator()(const EnvPath& path, std::vector<double>& phi_buf,
                                     std::vector<double>& val_buf) const {
        const double lhs = path_integral(path, *model, lhs_ig, ts, n_laplace, phi_buf,
                                         val_buf) /
                           gk;
        const double m0 = model->law(path.states[0]).mean();
        const double rhs = gauss_legendre(1.0, m0, [&](double u) {
            const double phi = quenched_laplace(path, *model, u, n_laplace);
            return Q_eval(*table, phi).value * std::pow(u, r - 1.0);
        });
        return {lhs, rhs};
    }
};

}  // namespace detail

inline IdentityResult identity_check(const EnvironmentModel& model, int k, const QTable& table,
                                     const LaplaceMcParams& params) {
    const double r = solve_r_k(model, k);
    require(std::isfinite(r), errc::infinite_critical, "r_k = +inf");
    const double gk = gamma_k(model, k);
    const TiltedEnvironment tilt(model, -r);
    detail::PathIntegrand lhs_ig{&model, k, r, true, gk};
    const double T = detail::pilot_upper_limit(model, tilt, lhs_ig, params);
    const auto ts = detail::log_spaced(params.t_min, T, params.grid_points);

    const detail::IdentityEvaluator fine{&model, &table, r, gk, lhs_ig, ts, params.n_laplace};

    struct Sums {
        double lhs = 0.0, rhs = 0.0, lhs_sq = 0.0, rhs_sq = 0.0, diff = 0.0, diff_sq = 0.0;
    };
    const long long nblocks = (params.paths + kMcBlockSize - 1) / kMcBlockSize;
    std::vector<Sums> partial(static_cast<std::size_t>(nblocks));
    parallel_for(static_cast<std::size_t>(nblocks), [&](std::size_t bi) {
        Sums acc;
        std::vector<double> phi_buf, val_buf;
        const long long first = static_cast<long long>(bi) * kMcBlockSize;
        const long long stop = std::min(params.paths, first + kMcBlockSize);
        for (long long i = first; i < stop; ++i) {
            Rng rng = substream(params.seed, static_cast<std::uint64_t>(i));
            const EnvPath path = sample_env_path(tilt, params.n_laplace, rng);
            const auto [lhs_i, rhs_i] = fine(path, phi_buf, val_buf);
            const double d = lhs_i - rhs_i;
            acc.lhs += lhs_i;
            acc.rhs += rhs_i;
            acc.lhs_sq += lhs_i * lhs_i;
            acc.rhs_sq += rhs_i * rhs_i;
            acc.diff += d;
            acc.diff_sq += d * d;
        }
        partial[bi] = acc;
    });

    // deterministic error budget: grid-halving + depth-shortening deltas on a
    // pilot sample, plus the extrapolated lhs tail past T
    double numeric_bound = 0.0;
    {
        detail::IdentityEvaluator coarse = fine;
        coarse.ts.clear();
        for (std::size_t g = 0; g < ts.size(); g += 2) coarse.ts.push_back(ts[g]);
        detail::IdentityEvaluator shallow = fine;
        shallow.n_laplace = std::max(8, params.n_laplace - 8);

        constexpr int kPilot = 256;
        std::vector<double> phi_buf, val_buf, tail_curve(ts.size(), 0.0), phi(ts.size());
        double d_fine = 0.0, d_coarse = 0.0, d_shallow = 0.0;
        for (int i = 0; i < kPilot; ++i) {
            Rng rng = substream(params.seed, static_cast<std::uint64_t>(i));
            const EnvPath path = sample_env_path(tilt, params.n_laplace, rng);
            const auto [fl, fr] = fine(path, phi_buf, val_buf);
            const auto [cl, cr2] = coarse(path, phi_buf, val_buf);
            const auto [sl, sr] = shallow(path, phi_buf, val_buf);
            d_fine += fl - fr;
            d_coarse += cl - cr2;
            d_shallow += sl - sr;
            quenched_laplace_curve(path, model, ts, params.n_laplace, phi);
            for (std::size_t g = 0; g < ts.size(); ++g)
                tail_curve[g] += lhs_ig.apply(phi[g]) * std::pow(ts[g], r - 1.0) / kPilot;
        }
        numeric_bound = std::abs(d_fine - d_coarse) / kPilot +
                        std::abs(d_fine - d_shallow) / kPilot +
                        detail::tail_estimate(ts, tail_curve) / gk;
    }
    Sums total;
    for (const auto& b : partial) {
        total.lhs += b.lhs;
        total.rhs += b.rhs;
        total.lhs_sq += b.lhs_sq;
        total.rhs_sq += b.rhs_sq;
        total.diff += b.diff;
        total.diff_sq += b.diff_sq;
    }
    const double n = static_cast<double>(params.paths);
    auto stderr_of = [&](double sum, double sum_sq) {
        const double var = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0));
        return std::sqrt(var / n);
    };
    IdentityResult out;
    out.lhs = total.lhs / n;
    out.rhs = total.rhs / n;
    out.lhs_std_error = stderr_of(total.lhs, total.lhs_sq);
    out.rhs_std_error = stderr_of(total.rhs, total.rhs_sq);
    out.diff = total.diff / n;
    out.diff_std_error = stderr_of(total.diff, total.diff_sq);
    out.numeric_bound = numeric_bound;
    out.pass = std::abs(out.diff) <= 3.0 * out.diff_std_error + out.numeric_bound;
    return out;
}

}  // namespace bpre
