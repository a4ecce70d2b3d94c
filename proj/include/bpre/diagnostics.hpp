#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "bpre/env_model.hpp"
#include "bpre/errors.hpp"
#include "bpre/exact_engine.hpp"
#include "bpre/monte_carlo.hpp"
#include "bpre/parallel.hpp"
#include "bpre/rate_fn.hpp"

namespace bpre {

// essinf m_0(2)/m_0^2 over the finite environment.
inline double min_variance_ratio(const EnvironmentModel& model) {
    double lo = kInf;
    for (int s = 0; s < model.size(); ++s) {
        const double m = model.law(s).mean();
        lo = std::min(lo, model.law(s).second_moment() / (m * m));
    }
    return lo;
}

struct QuenchedVariance {
    double value = 0.0;       // truncated series
    double tail_bound = 0.0;  // valid only when tail_bounded
    bool tail_bounded = false;
};

// delta_inf^2 along a fixed environment: sum_j e^{-(S_{start+j} - S_start)}
// (m(2)/m^2 - 1) truncated at `depth` terms. Geometric tail bound when every
// state mean exceeds 1.
inline QuenchedVariance delta_inf_sq(const EnvPath& path, const EnvironmentModel& model,
                                     int depth, int start = 0) {
    require(min_variance_ratio(model) > 1.0, errc::hypothesis_violated,
            "essinf m_0(2)/m_0^2 <= 1");
    require(start >= 0 && start + depth <= path.length(), errc::path_too_short,
            "path shorter than start + depth");
    QuenchedVariance out;
    const double s0 = path.log_pi_at(start);
    double max_excess = 0.0;
    for (int s = 0; s < model.size(); ++s) {
        const double m = model.law(s).mean();
        max_excess = std::max(max_excess, model.law(s).second_moment() / (m * m) - 1.0);
    }
    for (int j = 0; j < depth; ++j) {
        const int state = path.states[static_cast<std::size_t>(start + j)];
        const double m = model.law(state).mean();
        const double excess = model.law(state).second_moment() / (m * m) - 1.0;
        out.value += std::exp(-(path.log_pi_at(start + j) - s0)) * excess;
    }
    const double min_mean = model.min_mean();
    if (min_mean > 1.0) {
        out.tail_bounded = true;
        out.tail_bound = max_excess * std::exp(-(path.log_pi_at(start + depth) - s0)) /
                         (1.0 - 1.0 / min_mean);
    }
    return out;
}

inline double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

struct CltReport {
    int n = 0;
    double distance = 0.0;  // empirical Kolmogorov distance to the normal
    double bound = 0.0;     // C * A_{k,n}(eps/2), C fitted on the series anchor
    long long samples = 0;
};

// Kolmogorov distance between the normalized fluctuation statistic
// Pi_n (W - W_n) / (sqrt(Z_n) delta_inf(T^n xi)) and the standard normal,
// with W approximated by W_{n + m_extra}. The residual depth bias is not
// bounded here; it is a method caveat, not an error term.
inline CltReport clt_distance(const EnvironmentModel& model, int k, int n, int m_extra,
                              long long samples, std::uint64_t seed) {
    require(min_variance_ratio(model) > 1.0, errc::hypothesis_violated,
            "essinf m_0(2)/m_0^2 <= 1");
    constexpr int kDeltaDepth = 48;
    const int horizon = n + m_extra;
    const TiltedEnvironment tilt(model, 0.0);

    std::vector<double> stats(static_cast<std::size_t>(samples));
    const long long nblocks = (samples + kMcBlockSize - 1) / kMcBlockSize;
    parallel_for(static_cast<std::size_t>(nblocks), [&](std::size_t bi) {
        const long long first = static_cast<long long>(bi) * kMcBlockSize;
        const long long stop = std::min(samples, first + kMcBlockSize);
        for (long long i = first; i < stop; ++i) {
            Rng rng = substream(seed, static_cast<std::uint64_t>(i));
            // environment extends past the population horizon for delta_inf
            EnvPath path = sample_env_path(tilt, horizon + kDeltaDepth, rng);
            long long z = k;
            long long z_at_n = k;
            bool overflowed = false;
            for (int j = 0; j < horizon; ++j) {
                if (j == n) z_at_n = z;
                z = sample_generation(model.law(path.states[static_cast<std::size_t>(j)]), z,
                                      rng, overflowed);
            }
            if (n == horizon) z_at_n = z;
            require(!overflowed, errc::overflow, "population exceeded 2^62");
            const QuenchedVariance dv =
                delta_inf_sq(path, model, m_extra + kDeltaDepth, n);
            const double w_gap = static_cast<double>(z) *
                                     std::exp(-(path.log_pi_at(horizon) - path.log_pi_at(n))) -
                                 static_cast<double>(z_at_n);
            stats[static_cast<std::size_t>(i)] =
                w_gap / (std::sqrt(static_cast<double>(z_at_n)) * std::sqrt(dv.value));
        }
    });
    std::sort(stats.begin(), stats.end());
    double dist = 0.0;
    const double inv_n = 1.0 / static_cast<double>(samples);
    for (std::size_t i = 0; i < stats.size(); ++i) {
        const double cdf = standard_normal_cdf(stats[i]);
        dist = std::max(dist, std::abs(static_cast<double>(i + 1) * inv_n - cdf));
        dist = std::max(dist, std::abs(cdf - static_cast<double>(i) * inv_n));
    }
    return CltReport{n, dist, 0.0, samples};
}

// Runs the distance at each n and fits the unknown constant on the smallest
// one; the remaining entries carry the fitted bound C A_{k,n}(eps/2).
inline std::vector<CltReport> clt_series(const EnvironmentModel& model, int k,
                                         const std::vector<int>& n_list, int m_extra,
                                         long long samples, std::uint64_t seed,
                                         double epsilon = 1.0) {
    require(!n_list.empty(), errc::domain_error, "empty n list");
    const CriticalConstants constants = critical_constants(model, k);
    std::vector<CltReport> out;
    out.reserve(n_list.size());
    for (const int n : n_list)
        out.push_back(clt_distance(model, k, n, m_extra, samples, seed));
    const int n0 = out.front().n;
    const double fitted_c = out.front().distance / a_kn(model, constants, n0, epsilon / 2.0);
    for (auto& report : out)
        report.bound = fitted_c * a_kn(model, constants, report.n, epsilon / 2.0);
    return out;
}

// B_p = 2 min{ sqrt(k) : integer k >= p/2 }.
inline double mz_constant(double p) {
    require(p > 1.0, errc::domain_error, "Marcinkiewicz-Zygmund constant needs p > 1");
    const double k = std::max(1.0, std::ceil(p / 2.0));
    return 2.0 * std::sqrt(k);
}

// Exact P(|M_{0,j} - m_0| > a) for the empirical mean of j offspring draws,
// by j-fold convolution per state.
inline double empirical_mean_tail(const OffspringLaw& law, int j, double a) {
    require(j >= 1 && j <= 64, errc::j_too_large, "empirical mean size outside [1, 64]");
    std::vector<double> conv(law.pmf);
    for (int fold = 1; fold < j; ++fold) {
        std::vector<double> next(conv.size() + law.pmf.size() - 1, 0.0);
        for (std::size_t x = 0; x < conv.size(); ++x) {
            if (conv[x] == 0.0) continue;
            for (std::size_t c = 1; c < law.pmf.size(); ++c)
                next[x + c] += conv[x] * law.pmf[c];
        }
        conv = std::move(next);
    }
    const double m = law.mean();
    double tail = 0.0;
    for (std::size_t sum = 0; sum < conv.size(); ++sum) {
        const double mean_j = static_cast<double>(sum) / static_cast<double>(j);
        if (std::abs(mean_j - m) > a) tail += conv[sum];
    }
    return tail;
}

inline double empirical_mean_tail(const EnvironmentModel& model, int j, double a) {
    double acc = 0.0;
    for (int s = 0; s < model.size(); ++s)
        acc += model.weight(s) * empirical_mean_tail(model.law(s), j, a);
    return acc;
}

struct RatioDeviation {
    McEstimate estimate;  // P_k(|R_n - m_n| > a)
    double bound = 0.0;   // C_p a^{-p} A_{k,n}(p-1) or A_{k,n}(p/2)
    double c_p = 0.0;
};

// Simulates R_n = Z_{n+1}/Z_n against the realized conditional mean and
// compares with the moment bound, C_p = B_p^p E|Z_1 - m_0|^p.
inline RatioDeviation ratio_deviation(const EnvironmentModel& model, int k, int n, double a,
                                      double p, long long replicates, std::uint64_t seed) {
    require(a > 0.0, errc::domain_error, "deviation level must be > 0");
    require(p > 1.0, errc::domain_error, "moment order must be > 1");
    const TiltedEnvironment tilt(model, 0.0);
    RatioDeviation out;
    out.estimate = mc_run(replicates, seed, 0.0, [&](Rng& rng, long long) {
        Trajectory traj = simulate(tilt, k, n, rng);
        require(!traj.overflowed, errc::overflow, "population exceeded 2^62");
        const int s = tilt.sample(rng);
        const long long zn = traj.z.back();
        bool overflowed = false;
        const long long znext = sample_generation(model.law(s), zn, rng, overflowed);
        require(!overflowed, errc::overflow, "population exceeded 2^62");
        const double ratio = static_cast<double>(znext) / static_cast<double>(zn);
        return std::abs(ratio - model.law(s).mean()) > a ? 1.0 : 0.0;
    });

    double abs_moment = 0.0;  // E|Z_1 - m_0|^p
    for (int s = 0; s < model.size(); ++s) {
        const auto& law = model.law(s);
        const double m = law.mean();
        double acc = 0.0;
        for (std::size_t i = 1; i < law.pmf.size(); ++i)
            acc += std::pow(std::abs(static_cast<double>(i) - m), p) * law.pmf[i];
        abs_moment += model.weight(s) * acc;
    }
    out.c_p = std::pow(mz_constant(p), p) * abs_moment;
    const CriticalConstants constants = critical_constants(model, k);
    const double order = p <= 2.0 ? p - 1.0 : p / 2.0;
    out.bound = out.c_p * std::pow(a, -p) * a_kn(model, constants, n, order);
    return out;
}

}  // namespace bpre
