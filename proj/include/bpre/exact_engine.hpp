#pragma once

#include <cmath>
#include <ostream>
#include <vector>

#include "bpre/env_model.hpp"
#include "bpre/errors.hpp"
#include "bpre/parallel.hpp"

namespace bpre {

// Bracketing interval for a truncated expectation.
struct Interval {
    double lower = 0.0;
    double upper = 0.0;

    double mid() const { return 0.5 * (lower + upper); }
    double half_width() const { return 0.5 * (upper - lower); }
};

// Annealed one-step transition matrix p(i,j) = P(Z_1 = j | Z_0 = i) up to a
// population cap. Since p_0 = 0 the population is non-decreasing, so row i
// lives on [i, i*max_offspring] and everything past the cap is accumulated
// as per-row overflow.
class TruncatedKernel {
public:
    struct Row {
        int first = 0;              // column index of p[0] (== i)
        std::vector<double> p;      // p(i, first + d)
        double overflow = 0.0;      // mass of transitions beyond the cap
    };

    TruncatedKernel(int cap, std::vector<Row> rows)
        : cap_(cap), rows_(std::move(rows)) {}

    int cap() const { return cap_; }

    const Row& row(int i) const { return rows_[static_cast<std::size_t>(i - 1)]; }

    double p(int i, int j) const {
        const Row& r = row(i);
        const int d = j - r.first;
        if (d < 0 || d >= static_cast<int>(r.p.size())) return 0.0;
        return r.p[static_cast<std::size_t>(d)];
    }

    double row_overflow(int i) const { return row(i).overflow; }

    // Debug CSV dump (columns i, j, p).
    void to_csv(std::ostream& out) const {
        out << "i,j,p\n";
        char buf[64];
        for (int i = 1; i <= cap_; ++i) {
            const Row& r = row(i);
            for (std::size_t d = 0; d < r.p.size(); ++d) {
                if (r.p[d] == 0.0) continue;
                std::snprintf(buf, sizeof buf, "%d,%d,%.17g\n", i, r.first + static_cast<int>(d),
                              r.p[d]);
                out << buf;
            }
        }
    }

private:
    int cap_;
    std::vector<Row> rows_;
};

// Builds p(i,j) = Sum_s w_s (pmf_s)^{*i}(j) by incremental convolution
// i = 1..cap per state. Rows are assembled in parallel-safe per-state
// buffers; the result is deterministic regardless of worker count.
inline TruncatedKernel annealed_kernel(const EnvironmentModel& model, int cap) {
    require(cap >= model.max_offspring(), errc::cap_too_small,
            "cap below the maximum offspring support");
    struct StateRows {
        std::vector<std::vector<double>> rows;  // rows[i-1], offset i
        std::vector<double> overflow;
    };
    std::vector<StateRows> per_state(static_cast<std::size_t>(model.size()));
    parallel_for(static_cast<std::size_t>(model.size()), [&](std::size_t s) {
        const auto& pmf = model.law(static_cast<int>(s)).pmf;
        const int maxoff = static_cast<int>(pmf.size()) - 1;
        auto& out = per_state[s];
        out.rows.resize(static_cast<std::size_t>(cap));
        out.overflow.assign(static_cast<std::size_t>(cap), 0.0);
        // i = 1: the pmf itself, shifted so index d corresponds to j = 1 + d.
        std::vector<double> conv(pmf.begin() + 1, pmf.end());
        out.rows[0] = conv;
        for (int i = 2; i <= cap; ++i) {
            // next(j) = sum_c conv(j - c) pmf[c] on [i, min(i*maxoff, cap)].
            // Mass already past the cap can only move further right, so the
            // truncated chain stays exact below the cap.
            const int prev_first = i - 1;
            const int next_first = i;
            const int next_last =
                static_cast<int>(std::min<long long>(static_cast<long long>(i) * maxoff, cap));
            std::vector<double> next(static_cast<std::size_t>(next_last - next_first + 1), 0.0);
            for (std::size_t d = 0; d < conv.size(); ++d) {
                const double v = conv[d];
                if (v == 0.0) continue;
                const int j_prev = prev_first + static_cast<int>(d);
                const int c_max = std::min(maxoff, cap - j_prev);
                for (int c = 1; c <= c_max; ++c)
                    next[static_cast<std::size_t>(j_prev + c - next_first)] +=
                        v * pmf[static_cast<std::size_t>(c)];
            }
            out.rows[static_cast<std::size_t>(i - 1)] = std::move(next);
            conv = out.rows[static_cast<std::size_t>(i - 1)];
        }
        for (int i = 1; i <= cap; ++i) {
            double sum = 0.0;
            for (double v : out.rows[static_cast<std::size_t>(i - 1)]) sum += v;
            out.overflow[static_cast<std::size_t>(i - 1)] = std::max(0.0, 1.0 - sum);
        }
    });

    std::vector<TruncatedKernel::Row> rows(static_cast<std::size_t>(cap));
    parallel_for(static_cast<std::size_t>(cap), [&](std::size_t ri) {
        const int i = static_cast<int>(ri) + 1;
        std::size_t width = 1;
        for (const auto& st : per_state)
            width = std::max(width, st.rows[ri].size());
        TruncatedKernel::Row row;
        row.first = i;
        row.p.assign(width, 0.0);
        row.overflow = 0.0;
        for (int s = 0; s < model.size(); ++s) {
            const double w = model.weight(s);
            const auto& src = per_state[static_cast<std::size_t>(s)].rows[ri];
            for (std::size_t d = 0; d < src.size(); ++d) row.p[d] += w * src[d];
            row.overflow += w * per_state[static_cast<std::size_t>(s)].overflow[ri];
        }
        rows[ri] = std::move(row);
    });
    return TruncatedKernel(cap, std::move(rows));
}

// Truncated annealed law of Z_n started from k, plus the escaped mass.
// Because Z is non-decreasing, values[j] is exact for every j <= cap.
struct PmfVector {
    int k = 1;
    int n = 0;
    std::vector<double> values;  // index j in [0, cap]
    double overflow = 0.0;

    double at(int j) const {
        if (j < 0 || j >= static_cast<int>(values.size())) return 0.0;
        return values[static_cast<std::size_t>(j)];
    }
};

inline PmfVector initial_distribution(const TruncatedKernel& kernel, int k) {
    require(k >= 1 && k <= kernel.cap(), errc::domain_error, "initial size outside [1, cap]");
    PmfVector pmf;
    pmf.k = k;
    pmf.n = 0;
    pmf.values.assign(static_cast<std::size_t>(kernel.cap()) + 1, 0.0);
    pmf.values[static_cast<std::size_t>(k)] = 1.0;
    return pmf;
}

inline void step_distribution(const TruncatedKernel& kernel, PmfVector& pmf) {
    const int cap = kernel.cap();
    std::vector<double> next(static_cast<std::size_t>(cap) + 1, 0.0);
    double overflow = pmf.overflow;
    for (int i = 1; i <= cap; ++i) {
        const double v = pmf.values[static_cast<std::size_t>(i)];
        if (v == 0.0) continue;
        const auto& row = kernel.row(i);
        for (std::size_t d = 0; d < row.p.size(); ++d)
            next[static_cast<std::size_t>(row.first) + d] += v * row.p[d];
        overflow += v * row.overflow;
    }
    pmf.values = std::move(next);
    pmf.overflow = overflow;
    pmf.n += 1;
}

inline PmfVector distribution_of_Zn(const TruncatedKernel& kernel, int k, int n) {
    PmfVector pmf = initial_distribution(kernel, k);
    for (int step = 0; step < n; ++step) step_distribution(kernel, pmf);
    return pmf;
}

// [lower, upper] bracket of E_k[Z_n^{-r}]: the truncated sum plus, at most,
// overflow * cap^{-r} (every escaped state exceeds the cap).
inline Interval harmonic_moment(const PmfVector& pmf, double r) {
    double lower = 0.0;
    for (std::size_t j = 1; j < pmf.values.size(); ++j)
        if (pmf.values[j] != 0.0)
            lower += std::pow(static_cast<double>(j), -r) * pmf.values[j];
    const double cap = static_cast<double>(pmf.values.size() - 1);
    return Interval{lower, lower + pmf.overflow * std::pow(cap, -r)};
}

inline Interval exact_harmonic_moment(const TruncatedKernel& kernel, int k, int n, double r) {
    require(r >= 0.0, errc::domain_error, "harmonic order must be >= 0");
    return harmonic_moment(distribution_of_Zn(kernel, k, n), r);
}

// g_n(t) = f_{xi_0} o ... o f_{xi_{n-1}}(t), composed right to left.
inline double quenched_pgf(const EnvPath& path, const EnvironmentModel& model, double t) {
    require(t >= 0.0 && t <= 1.0, errc::domain_error, "pgf argument outside [0,1]");
    double u = t;
    for (int j = path.length(); j-- > 0;)
        u = model.law(path.states[static_cast<std::size_t>(j)]).pgf(u);
    return u;
}

struct PgfValue {
    double value = 0.0;         // truncated sum
    double overflow_bound = 0.0;  // <= t^cap * overflow, reported separately
};

// G_{k,n}(t) = E_k[t^{Z_n}] from the truncated law.
inline PgfValue annealed_pgf(const PmfVector& pmf, double t) {
    require(t >= 0.0 && t < 1.0, errc::domain_error, "annealed pgf needs t in [0,1)");
    double value = 0.0;
    double tj = 1.0;
    for (std::size_t j = 0; j < pmf.values.size(); ++j) {
        if (pmf.values[j] != 0.0) value += pmf.values[j] * tj;
        tj *= t;
        if (tj == 0.0) break;
    }
    const double cap = static_cast<double>(pmf.values.size() - 1);
    return PgfValue{value, pmf.overflow * std::pow(t, cap)};
}

inline PgfValue annealed_pgf(const TruncatedKernel& kernel, int k, int n, double t) {
    return annealed_pgf(distribution_of_Zn(kernel, k, n), t);
}

inline void pmf_to_csv(const PmfVector& pmf, std::ostream& out) {
    out << "j,probability\n";
    char buf[64];
    for (std::size_t j = 0; j < pmf.values.size(); ++j) {
        if (pmf.values[j] == 0.0) continue;
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", j, pmf.values[j]);
        out << buf;
    }
}

}  // namespace bpre
