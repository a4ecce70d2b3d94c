#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bpre/errors.hpp"
#include "bpre/rng.hpp"

namespace bpre {

inline constexpr double kProbabilityTolerance = 1e-12;
inline constexpr int kDefaultSupportCap = 64;

// One environment state's reproduction law. Finite support, no mass at zero,
// probabilities indexed by offspring count.
struct OffspringLaw {
    std::vector<double> pmf;  // pmf[i] = P(offspring = i); pmf[0] == 0

    int max_support() const { return static_cast<int>(pmf.size()) - 1; }
    double p(int i) const {
        return (i >= 0 && i < static_cast<int>(pmf.size())) ? pmf[static_cast<std::size_t>(i)] : 0.0;
    }
    double p1() const { return p(1); }

    double mean() const { return moment(1.0); }
    double second_moment() const { return moment(2.0); }
    double log_mean() const { return std::log(mean()); }

    // Sum_i i^p pmf[i], exact for the finite support.
    double moment(double order) const {
        double acc = 0.0;
        for (std::size_t i = 1; i < pmf.size(); ++i)
            acc += std::pow(static_cast<double>(i), order) * pmf[i];
        return acc;
    }

    // f(t) = Sum_i pmf[i] t^i by Horner, monotone non-decreasing on [0,1].
    double pgf(double t) const {
        require(t >= 0.0 && t <= 1.0, errc::domain_error, "pgf argument outside [0,1]");
        double acc = 0.0;
        for (std::size_t i = pmf.size(); i-- > 0;) acc = acc * t + pmf[i];
        return acc;
    }

    void validate(int support_cap) const {
        require(pmf.size() >= 2, errc::non_stochastic, "offspring law needs support at i >= 1");
        require(pmf[0] == 0.0, errc::zero_offspring_mass, "offspring law has mass at 0");
        require(max_support() <= support_cap, errc::non_stochastic,
                "offspring support exceeds cap " + std::to_string(support_cap));
        double total = 0.0;
        for (double v : pmf) {
            require(v >= 0.0 && v <= 1.0, errc::non_stochastic, "pmf entry outside [0,1]");
            total += v;
        }
        require(std::abs(total - 1.0) <= kProbabilityTolerance, errc::non_stochastic,
                "pmf sums to " + std::to_string(total));
    }
};

struct EnvState {
    double weight = 0.0;
    OffspringLaw law;
};

// Raw construction input: (weight, pmf as count -> probability).
struct StateSpec {
    double weight = 0.0;
    std::map<int, double> pmf;
};

// Finite weighted set of offspring laws. Immutable after construction and
// safe to share across workers.
class EnvironmentModel {
public:
    EnvironmentModel(std::vector<EnvState> states, std::string label, int support_cap)
        : states_(std::move(states)), label_(std::move(label)) {
        require(!states_.empty(), errc::non_stochastic, "environment needs at least one state");
        double wsum = 0.0;
        mu_ = 0.0;
        for (const auto& s : states_) {
            require(s.weight > 0.0, errc::non_stochastic, "environment weight must be > 0");
            s.law.validate(support_cap);
            wsum += s.weight;
            mu_ += s.weight * s.law.log_mean();
        }
        require(std::abs(wsum - 1.0) <= kProbabilityTolerance, errc::non_stochastic,
                "environment weights sum to " + std::to_string(wsum));
        require(mu_ > 0.0, errc::subcritical, "E[log m_0] <= 0, process not supercritical");
        max_offspring_ = 0;
        for (const auto& s : states_) max_offspring_ = std::max(max_offspring_, s.law.max_support());
    }

    int size() const { return static_cast<int>(states_.size()); }
    const EnvState& state(int s) const { return states_[static_cast<std::size_t>(s)]; }
    const OffspringLaw& law(int s) const { return state(s).law; }
    double weight(int s) const { return state(s).weight; }
    double mu() const { return mu_; }
    const std::string& label() const { return label_; }
    int max_offspring() const { return max_offspring_; }

    // Smallest per-state mean; > 1 makes geometric tail bounds valid.
    double min_mean() const {
        double m = states_.front().law.mean();
        for (const auto& s : states_) m = std::min(m, s.law.mean());
        return m;
    }

private:
    std::vector<EnvState> states_;
    std::string label_;
    double mu_ = 0.0;
    int max_offspring_ = 0;
};

inline EnvironmentModel build_environment(const std::vector<StateSpec>& spec,
                                          std::string label = "model",
                                          int support_cap = kDefaultSupportCap) {
    require(!spec.empty(), errc::non_stochastic, "empty environment spec");
    std::vector<EnvState> states;
    states.reserve(spec.size());
    for (const auto& in : spec) {
        int max_i = 0;
        for (const auto& [i, p] : in.pmf) {
            require(i >= 0, errc::non_stochastic, "negative offspring count");
            if (p != 0.0) max_i = std::max(max_i, i);
        }
        OffspringLaw law;
        law.pmf.assign(static_cast<std::size_t>(max_i) + 1, 0.0);
        for (const auto& [i, p] : in.pmf)
            if (i <= max_i) law.pmf[static_cast<std::size_t>(i)] = p;
        states.push_back(EnvState{in.weight, std::move(law)});
    }
    return EnvironmentModel(std::move(states), std::move(label), support_cap);
}

// Geometric (fractional-linear, a_0 = 0) states p_i = (1-b) b^{i-1},
// truncated at the smallest K with tail mass < tail_epsilon, renormalized.
inline EnvironmentModel fractional_linear_geometric(
    const std::vector<std::pair<double, double>>& weight_b_pairs, double tail_epsilon,
    std::string label = "geometric", int support_cap = 1024) {
    require(!weight_b_pairs.empty(), errc::non_stochastic, "empty geometric spec");
    require(tail_epsilon > 0.0, errc::domain_error, "tail_epsilon must be > 0");
    std::vector<EnvState> states;
    int truncation = 0;
    for (const auto& [w, b] : weight_b_pairs) {
        require(b > 0.0 && b < 1.0, errc::domain_error,
                "geometric parameter b outside (0,1): " + std::to_string(b));
        // tail mass past K is b^K
        int K = 1;
        double tail = b;
        while (tail >= tail_epsilon && K < support_cap) {
            tail *= b;
            ++K;
        }
        require(tail < tail_epsilon, errc::cap_too_small, "geometric truncation exceeds support cap");
        OffspringLaw law;
        law.pmf.assign(static_cast<std::size_t>(K) + 1, 0.0);
        double mass = 0.0;
        double term = 1.0 - b;
        for (int i = 1; i <= K; ++i) {
            law.pmf[static_cast<std::size_t>(i)] = term;
            mass += term;
            term *= b;
        }
        for (int i = 1; i <= K; ++i) law.pmf[static_cast<std::size_t>(i)] /= mass;
        truncation = std::max(truncation, K);
        states.push_back(EnvState{w, std::move(law)});
    }
    label += "[trunc<=" + std::to_string(truncation) + ",eps=" + std::to_string(tail_epsilon) + "]";
    return EnvironmentModel(std::move(states), std::move(label), support_cap);
}

// Environment law reweighted by m_s^lambda. lambda = 0 reproduces the
// original weights; the normalizer is E[m_0^lambda].
class TiltedEnvironment {
public:
    TiltedEnvironment(const EnvironmentModel& model, double lambda)
        : model_(&model), lambda_(lambda) {
        const int n = model.size();
        weights_.resize(static_cast<std::size_t>(n));
        normalizer_ = 0.0;
        for (int s = 0; s < n; ++s) {
            const double w = model.weight(s) * std::pow(model.law(s).mean(), lambda);
            weights_[static_cast<std::size_t>(s)] = w;
            normalizer_ += w;
        }
        cdf_.resize(static_cast<std::size_t>(n));
        double acc = 0.0;
        for (int s = 0; s < n; ++s) {
            weights_[static_cast<std::size_t>(s)] /= normalizer_;
            acc += weights_[static_cast<std::size_t>(s)];
            cdf_[static_cast<std::size_t>(s)] = acc;
        }
        cdf_.back() = 1.0;
    }

    double lambda() const { return lambda_; }
    double normalizer() const { return normalizer_; }  // E[m_0^lambda]
    double weight(int s) const { return weights_[static_cast<std::size_t>(s)]; }
    const EnvironmentModel& model() const { return *model_; }

    int sample(Rng& rng) const {
        const double u = rng.uniform();
        const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
        return static_cast<int>(it - cdf_.begin());
    }

private:
    const EnvironmentModel* model_;
    double lambda_;
    double normalizer_ = 0.0;
    std::vector<double> weights_;
    std::vector<double> cdf_;
};

struct SampledState {
    int state = 0;
    double normalizer = 1.0;
};

inline SampledState sample_environment_state(const EnvironmentModel& model, Rng& rng,
                                             double lambda = 0.0) {
    TiltedEnvironment tilt(model, lambda);
    return SampledState{tilt.sample(rng), tilt.normalizer()};
}

// Environment sequence xi_0..xi_{n-1} plus the running log products
// S_j = log(m_0 ... m_{j-1}); kept in log scale so long paths never overflow.
struct EnvPath {
    std::vector<int> states;
    std::vector<double> log_pi;  // length states.size() + 1, log_pi[0] = 0

    int length() const { return static_cast<int>(states.size()); }
    double log_pi_at(int j) const { return log_pi[static_cast<std::size_t>(j)]; }
};

inline EnvPath sample_env_path(const TiltedEnvironment& tilt, int n, Rng& rng) {
    EnvPath path;
    path.states.resize(static_cast<std::size_t>(n));
    path.log_pi.resize(static_cast<std::size_t>(n) + 1);
    path.log_pi[0] = 0.0;
    for (int j = 0; j < n; ++j) {
        const int s = tilt.sample(rng);
        path.states[static_cast<std::size_t>(j)] = s;
        path.log_pi[static_cast<std::size_t>(j) + 1] =
            path.log_pi[static_cast<std::size_t>(j)] + tilt.model().law(s).log_mean();
    }
    return path;
}

inline EnvPath sample_env_path(const EnvironmentModel& model, int n, Rng& rng,
                               double lambda = 0.0) {
    return sample_env_path(TiltedEnvironment(model, lambda), n, rng);
}

}  // namespace bpre
