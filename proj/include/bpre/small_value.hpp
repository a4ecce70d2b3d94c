#pragma once

#include <cmath>
#include <limits>
#include <ostream>
#include <vector>

#include "bpre/env_model.hpp"
#include "bpre/errors.hpp"
#include "bpre/exact_engine.hpp"

namespace bpre {

// gamma_k = P_k(Z_1 = k) = E[p_1(xi_0)^k]; strictly decreasing in k unless
// every state has p_1 in {0, 1}.
inline double gamma_k(const EnvironmentModel& model, int k) {
    require(k >= 1, errc::domain_error, "k must be >= 1");
    double acc = 0.0;
    for (int s = 0; s < model.size(); ++s)
        acc += model.weight(s) * std::pow(model.law(s).p1(), k);
    return acc;
}

// Coefficients q_{k,j} of the small-value series Q_k, with accessibility
// flags from the kernel reachability graph.
struct QTable {
    int k = 1;
    int J = 0;
    std::vector<double> q;          // index j in [0, J]; zero below k and off-graph
    std::vector<char> accessible;   // same indexing

    double at(int j) const {
        if (j < 0 || j > J) return 0.0;
        return q[static_cast<std::size_t>(j)];
    }

    void to_csv(std::ostream& out) const {
        out << "j,q,accessible\n";
        char buf[64];
        for (int j = k; j <= J; ++j) {
            std::snprintf(buf, sizeof buf, "%d,%.17g,%d\n", j, q[static_cast<std::size_t>(j)],
                          static_cast<int>(accessible[static_cast<std::size_t>(j)]));
            out << buf;
        }
    }
};

// States j reachable from k through positive kernel entries. Population is
// non-decreasing, so a single forward sweep settles every column.
inline std::vector<char> accessible_states(const TruncatedKernel& kernel, int k, int J) {
    std::vector<char> acc(static_cast<std::size_t>(J) + 1, 0);
    acc[static_cast<std::size_t>(k)] = 1;
    for (int j = k; j <= J; ++j) {
        if (!acc[static_cast<std::size_t>(j)]) continue;
        const auto& row = kernel.row(j);
        const int last = std::min(J, row.first + static_cast<int>(row.p.size()) - 1);
        for (int t = row.first; t <= last; ++t)
            if (row.p[static_cast<std::size_t>(t - row.first)] > 0.0)
                acc[static_cast<std::size_t>(t)] = 1;
    }
    return acc;
}

// Solves gamma_k q_{k,j} = sum_{i=k}^{j} p(i,j) q_{k,i} forward in j, with
// q_{k,k} = 1 and q = 0 on non-accessible states.
inline QTable q_table(const TruncatedKernel& kernel, const EnvironmentModel& model, int k, int J,
                      double eps_denom = 1e-12) {
    require(k >= 1, errc::domain_error, "k must be >= 1");
    require(J <= kernel.cap(), errc::cap_too_small, "q-table depth exceeds kernel cap");
    require(J >= k, errc::domain_error, "q-table depth below k");
    const double gk = gamma_k(model, k);
    require(gk > 0.0, errc::degenerate_denominator,
            "gamma_k = 0: no state keeps a size-k population in place");

    QTable table;
    table.k = k;
    table.J = J;
    table.q.assign(static_cast<std::size_t>(J) + 1, 0.0);
    table.accessible = accessible_states(kernel, k, J);
    table.q[static_cast<std::size_t>(k)] = 1.0;

    for (int j = k + 1; j <= J; ++j) {
        if (!table.accessible[static_cast<std::size_t>(j)]) continue;
        const double denom = gk - kernel.p(j, j);
        require(denom > eps_denom, errc::degenerate_denominator,
                "gamma_k - p(j,j) below " + std::to_string(eps_denom) + " at j = " +
                    std::to_string(j));
        double num = 0.0;
        for (int i = k; i < j; ++i) {
            const double pij = kernel.p(i, j);
            if (pij != 0.0) num += pij * table.q[static_cast<std::size_t>(i)];
        }
        table.q[static_cast<std::size_t>(j)] = num / denom;
    }
    return table;
}

struct MonotoneLimit {
    std::vector<double> ratios;  // P_k(Z_n = j) / gamma_k^n for n = 1..n_max
    double q_reference = 0.0;    // q_{k,j} from the recurrence
    double gap = 0.0;            // |last ratio - q_reference|
};

// The normalized point probabilities increase to q_{k,j}; a decrease signals
// a kernel or gamma bug, so it throws.
inline MonotoneLimit verify_monotone_limit(const TruncatedKernel& kernel,
                                           const EnvironmentModel& model, int k, int j,
                                           int n_max) {
    require(j >= k && j <= kernel.cap(), errc::domain_error, "state outside [k, cap]");
    const double gk = gamma_k(model, k);
    QTable table = q_table(kernel, model, k, j);
    require(table.accessible[static_cast<std::size_t>(j)], errc::domain_error,
            "state " + std::to_string(j) + " is not accessible from " + std::to_string(k));

    MonotoneLimit out;
    out.q_reference = table.at(j);
    out.ratios.reserve(static_cast<std::size_t>(n_max));
    PmfVector pmf = initial_distribution(kernel, k);
    double gk_pow = 1.0;
    double prev = -1.0;
    for (int n = 1; n <= n_max; ++n) {
        step_distribution(kernel, pmf);
        gk_pow *= gk;
        const double ratio = pmf.at(j) / gk_pow;
        const double slack = 1e-12 * std::max(1.0, std::abs(prev));
        require(ratio >= prev - slack, errc::non_monotone,
                "P(Z_n = j)/gamma_k^n decreased at n = " + std::to_string(n));
        out.ratios.push_back(ratio);
        prev = ratio;
    }
    out.gap = std::abs(out.ratios.back() - out.q_reference);
    return out;
}

struct SeriesValue {
    double value = 0.0;
    double tail_bound = 0.0;     // heuristic, from the empirical coefficient growth
    bool bound_is_heuristic = true;
};

// Partial sum of Q_k(t) = sum_j q_{k,j} t^j. The radius is 1 but no tail
// rate is available, so the bound extrapolates the last coefficient ratio.
inline SeriesValue Q_eval(const QTable& table, double t) {
    require(t >= 0.0 && t < 1.0, errc::domain_error, "Q_k needs t in [0,1)");
    SeriesValue out;
    double tj = std::pow(t, table.k);
    for (int j = table.k; j <= table.J; ++j) {
        out.value += table.at(j) * tj;
        tj *= t;
    }
    double growth = 1.0;
    if (table.J > table.k && table.at(table.J - 1) > 0.0 && table.at(table.J) > 0.0)
        growth = table.at(table.J) / table.at(table.J - 1);
    const double x = t * growth;
    // tj now equals t^{J+1}
    out.tail_bound = (x < 1.0) ? table.at(table.J) * growth * tj / (1.0 - x)
                               : std::numeric_limits<double>::infinity();
    return out;
}

// |gamma_k Q_k(t) - E[Q_k(f_0(t))]|, evaluated with the same table depth on
// both sides.
inline double functional_equation_residual(const QTable& table, const EnvironmentModel& model,
                                           double t) {
    require(t >= 0.0 && t < 1.0, errc::domain_error, "residual needs t in [0,1)");
    const double lhs = gamma_k(model, table.k) * Q_eval(table, t).value;
    double rhs = 0.0;
    for (int s = 0; s < model.size(); ++s)
        rhs += model.weight(s) * Q_eval(table, model.law(s).pgf(t)).value;
    return std::abs(lhs - rhs);
}

}  // namespace bpre
