#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "bpre/env_model.hpp"
#include "bpre/errors.hpp"
#include "bpre/parallel.hpp"
#include "bpre/rate_fn.hpp"
#include "bpre/rng.hpp"

namespace bpre {

// Replicates are grouped into fixed blocks; each block's partial sums depend
// only on (seed, block index) and the cross-block reduction runs in block
// order, so results are bit-identical for any worker count. Estimates merge
// exactly at block granularity.
inline constexpr long long kMcBlockSize = 1024;
inline constexpr long long kPopulationCap = 1ll << 62;

struct McBlock {
    long long first = 0;
    long long count = 0;
    double sum = 0.0;
    double sum_sq = 0.0;
    long long hits = 0;  // replicates with a non-zero contribution
};

// Mergeable Monte Carlo estimate.
struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    long long replicates = 0;
    double tilt = 0.0;
    std::uint64_t base_seed = 0;
    long long hits = 0;
    bool degenerate = false;  // indicator estimator saw no hit
    std::vector<McBlock> blocks;

    void finalize() {
        double sum = 0.0, sum_sq = 0.0;
        long long n = 0;
        hits = 0;
        for (const auto& b : blocks) {
            sum += b.sum;
            sum_sq += b.sum_sq;
            n += b.count;
            hits += b.hits;
        }
        replicates = n;
        mean = n > 0 ? sum / static_cast<double>(n) : 0.0;
        if (n > 1) {
            const double var =
                std::max(0.0, (sum_sq - sum * sum / static_cast<double>(n)) /
                                  static_cast<double>(n - 1));
            std_error = std::sqrt(var / static_cast<double>(n));
        } else {
            std_error = 0.0;
        }
        degenerate = hits == 0;
    }

    // Pool with an estimate over a disjoint, block-aligned replicate range.
    McEstimate merged(const McEstimate& other) const {
        require(base_seed == other.base_seed && tilt == other.tilt, errc::domain_error,
                "merging estimates from different runs");
        McEstimate out = *this;
        out.blocks.insert(out.blocks.end(), other.blocks.begin(), other.blocks.end());
        std::sort(out.blocks.begin(), out.blocks.end(),
                  [](const McBlock& a, const McBlock& b) { return a.first < b.first; });
        for (std::size_t i = 1; i < out.blocks.size(); ++i)
            require(out.blocks[i].first >=
                        out.blocks[i - 1].first + out.blocks[i - 1].count,
                    errc::domain_error, "merging overlapping replicate ranges");
        out.finalize();
        return out;
    }
};

// Runs fn(rng, replicate_index) for indices [first, first + replicates).
template <typename Fn>
McEstimate mc_run(long long replicates, std::uint64_t base_seed, double tilt, Fn&& fn,
                  long long first_replicate = 0) {
    McEstimate est;
    est.tilt = tilt;
    est.base_seed = base_seed;
    const long long nblocks = (replicates + kMcBlockSize - 1) / kMcBlockSize;
    est.blocks.resize(static_cast<std::size_t>(nblocks));
    parallel_for(static_cast<std::size_t>(nblocks), [&](std::size_t bi) {
        McBlock block;
        block.first = first_replicate + static_cast<long long>(bi) * kMcBlockSize;
        const long long stop =
            std::min(first_replicate + replicates, block.first + kMcBlockSize);
        for (long long i = block.first; i < stop; ++i) {
            Rng rng = substream(base_seed, static_cast<std::uint64_t>(i));
            const double v = fn(rng, i);
            block.sum += v;
            block.sum_sq += v * v;
            if (v != 0.0) ++block.hits;
            ++block.count;
        }
        est.blocks[bi] = block;
    });
    est.finalize();
    return est;
}

// One realized trajectory: environment, population sequence, W_n.
struct Trajectory {
    EnvPath path;
    std::vector<long long> z;  // Z_0..Z_n, non-decreasing
    double w = 0.0;            // exp(log Z_n - S_n)
    bool overflowed = false;
};

// Population sum of z i.i.d. draws by sequential binomial splits over the
// offspring support; cost O(support), independent of z.
inline long long sample_generation(const OffspringLaw& law, long long z, Rng& rng,
                                   bool& overflowed) {
    const auto& pmf = law.pmf;
    int last_positive = 0;
    for (int i = static_cast<int>(pmf.size()) - 1; i >= 1; --i)
        if (pmf[static_cast<std::size_t>(i)] > 0.0) {
            last_positive = i;
            break;
        }
    if (z > kPopulationCap / last_positive) {
        overflowed = true;
        return kPopulationCap;
    }
    long long remaining = z;
    long long total = 0;
    double mass = 1.0;
    for (int i = 1; i <= last_positive && remaining > 0; ++i) {
        const double p = pmf[static_cast<std::size_t>(i)];
        if (p <= 0.0) continue;
        long long cnt;
        if (i == last_positive) {
            cnt = remaining;
        } else {
            const double cond = std::min(1.0, p / mass);
            std::binomial_distribution<long long> bin(remaining, cond);
            cnt = bin(rng);
        }
        total += cnt * i;
        remaining -= cnt;
        mass -= p;
    }
    return total;
}

inline Trajectory simulate(const TiltedEnvironment& tilt, int k, int n, Rng& rng) {
    require(k >= 1, errc::domain_error, "k must be >= 1");
    require(n >= 0, errc::domain_error, "n must be >= 0");
    const EnvironmentModel& model = tilt.model();
    Trajectory traj;
    traj.path.states.resize(static_cast<std::size_t>(n));
    traj.path.log_pi.resize(static_cast<std::size_t>(n) + 1);
    traj.path.log_pi[0] = 0.0;
    traj.z.resize(static_cast<std::size_t>(n) + 1);
    traj.z[0] = k;
    for (int j = 0; j < n; ++j) {
        const int s = tilt.sample(rng);
        traj.path.states[static_cast<std::size_t>(j)] = s;
        traj.path.log_pi[static_cast<std::size_t>(j) + 1] =
            traj.path.log_pi[static_cast<std::size_t>(j)] + model.law(s).log_mean();
        traj.z[static_cast<std::size_t>(j) + 1] =
            sample_generation(model.law(s), traj.z[static_cast<std::size_t>(j)], rng,
                              traj.overflowed);
    }
    traj.w = std::exp(std::log(static_cast<double>(traj.z.back())) -
                      traj.path.log_pi.back());
    return traj;
}

inline Trajectory simulate(const EnvironmentModel& model, int k, int n, Rng& rng,
                           double lambda = 0.0) {
    return simulate(TiltedEnvironment(model, lambda), k, n, rng);
}

// Direct (untilted) estimator of E_k[Z_n^{-r}].
inline McEstimate estimate_harmonic(const EnvironmentModel& model, int k, int n, double r,
                                    long long replicates, std::uint64_t seed) {
    require(r > 0.0, errc::domain_error, "harmonic order must be > 0");
    const TiltedEnvironment tilt(model, 0.0);
    return mc_run(replicates, seed, 0.0, [&](Rng& rng, long long) {
        const Trajectory traj = simulate(tilt, k, n, rng);
        require(!traj.overflowed, errc::overflow, "population exceeded 2^62");
        return std::pow(static_cast<double>(traj.z.back()), -r);
    });
}

// Importance-sampling estimator of P_k(Z_n <= e^{theta n}) under a
// lambda-tilted environment; weight e^{-lambda S_n + n Lambda(lambda)}.
inline McEstimate estimate_lower_deviation(const EnvironmentModel& model, int k, int n,
                                           double theta, double lambda, long long replicates,
                                           std::uint64_t seed) {
    require(lambda <= 0.0, errc::domain_error, "tilt must be <= 0");
    require(theta > 0.0 && theta < model.mu(), errc::domain_error, "theta outside (0, E[X])");
    const double threshold = std::exp(theta * static_cast<double>(n));
    const double log_normalizer = log_laplace(model, lambda).value;  // Lambda(lambda)
    const TiltedEnvironment tilt(model, lambda);
    McEstimate est = mc_run(replicates, seed, lambda, [&](Rng& rng, long long) {
        const Trajectory traj = simulate(tilt, k, n, rng);
        require(!traj.overflowed, errc::overflow, "population exceeded 2^62");
        if (static_cast<double>(traj.z.back()) > threshold) return 0.0;
        const double log_weight =
            -lambda * traj.path.log_pi.back() + static_cast<double>(n) * log_normalizer;
        return std::exp(log_weight);
    });
    return est;
}

// Where the conjugate supremum is attained: -r_k in the linear regime,
// lambda_theta (clipped to [-r_k, 0]) in the smooth one.
inline double default_tilt(const EnvironmentModel& model, const CriticalConstants& constants,
                           double theta) {
    if (!std::isfinite(constants.r_k)) return legendre(model, theta).lambda_theta;
    if (theta < constants.theta_k) return -constants.r_k;
    const double lt = legendre(model, theta).lambda_theta;
    return std::min(0.0, std::max(-constants.r_k, lt));
}

struct RateSeqPoint {
    int n = 0;
    double p_hat = 0.0;
    double p_std_error = 0.0;
    double rate = 0.0;            // -(1/n) log p_hat
    double rate_std_error = 0.0;  // delta method
    double tilt = 0.0;
};

// Empirical rate sequence for P_k(Z_n <= e^{theta n}); throws when an
// estimate has no hit (the log-rate is undefined there).
inline std::vector<RateSeqPoint> rate_estimate(const EnvironmentModel& model, int k,
                                               double theta, const std::vector<int>& n_list,
                                               long long replicates, std::uint64_t seed) {
    const CriticalConstants constants = critical_constants(model, k);
    const double lambda = default_tilt(model, constants, theta);
    std::vector<RateSeqPoint> out;
    out.reserve(n_list.size());
    for (const int n : n_list) {
        const McEstimate est =
            estimate_lower_deviation(model, k, n, theta, lambda, replicates, seed);
        require(est.mean > 0.0, errc::degenerate_indicator,
                "no replicate hit the event at n = " + std::to_string(n));
        RateSeqPoint pt;
        pt.n = n;
        pt.p_hat = est.mean;
        pt.p_std_error = est.std_error;
        pt.rate = -std::log(est.mean) / static_cast<double>(n);
        pt.rate_std_error = est.std_error / (est.mean * static_cast<double>(n));
        pt.tilt = lambda;
        out.push_back(pt);
    }
    return out;
}

}  // namespace bpre
