#pragma once

#include <cmath>
#include <map>

#include "bpre/env_model.hpp"

// Independent test oracles. These deliberately avoid the library's kernel
// and convolution paths: populations evolve by full enumeration of every
// individual's offspring draw, so they are exponential in the population
// and only usable for tiny instances.
namespace oracles {

inline void enumerate_offspring(const bpre::OffspringLaw& law, int individuals, long long sum,
                                double prob, std::map<long long, double>& out) {
    if (individuals == 0) {
        out[sum] += prob;
        return;
    }
    for (std::size_t i = 1; i < law.pmf.size(); ++i) {
        if (law.pmf[i] == 0.0) continue;
        enumerate_offspring(law, individuals - 1, sum + static_cast<long long>(i),
                            prob * law.pmf[i], out);
    }
}

// Annealed law of Z_n by brute-force tree enumeration.
inline std::map<long long, double> brute_force_distribution(const bpre::EnvironmentModel& model,
                                                            int k, int n) {
    std::map<long long, double> current{{k, 1.0}};
    for (int gen = 0; gen < n; ++gen) {
        std::map<long long, double> next;
        for (const auto& [z, pz] : current) {
            for (int s = 0; s < model.size(); ++s) {
                std::map<long long, double> offspring;
                enumerate_offspring(model.law(s), static_cast<int>(z), 0, 1.0, offspring);
                for (const auto& [z2, p2] : offspring) next[z2] += pz * model.weight(s) * p2;
            }
        }
        current = std::move(next);
    }
    return current;
}

inline double brute_force_harmonic(const bpre::EnvironmentModel& model, int k, int n,
                                   double r) {
    double acc = 0.0;
    for (const auto& [z, p] : brute_force_distribution(model, k, n))
        acc += std::pow(static_cast<double>(z), -r) * p;
    return acc;
}

inline double brute_force_tail(const bpre::EnvironmentModel& model, int k, int n,
                               double threshold) {
    double acc = 0.0;
    for (const auto& [z, p] : brute_force_distribution(model, k, n))
        if (static_cast<double>(z) <= threshold) acc += p;
    return acc;
}

}  // namespace oracles
