#pragma once

#include <stdexcept>
#include <string>

namespace bpre {

// Error taxonomy shared by all modules. The CLI maps `validation` failures
// to exit code 1 and `numeric_guard` failures to exit code 2.
enum class errc {
    non_stochastic,
    zero_offspring_mass,
    subcritical,
    domain_error,
    cap_too_small,
    path_too_short,
    j_too_large,
    regime_mismatch,
    config_error,
    degenerate_denominator,
    non_monotone,
    hypothesis_violated,
    overflow,
    degenerate_indicator,
    infinite_critical,
};

enum class error_class { validation, numeric_guard };

constexpr error_class classify(errc code) {
    switch (code) {
        case errc::degenerate_denominator:
        case errc::non_monotone:
        case errc::hypothesis_violated:
        case errc::overflow:
        case errc::degenerate_indicator:
        case errc::infinite_critical:
            return error_class::numeric_guard;
        default:
            return error_class::validation;
    }
}

constexpr const char* errc_name(errc code) {
    switch (code) {
        case errc::non_stochastic: return "NonStochastic";
        case errc::zero_offspring_mass: return "ZeroOffspringMass";
        case errc::subcritical: return "Subcritical";
        case errc::domain_error: return "DomainError";
        case errc::cap_too_small: return "CapTooSmall";
        case errc::path_too_short: return "PathTooShort";
        case errc::j_too_large: return "JTooLarge";
        case errc::regime_mismatch: return "RegimeMismatch";
        case errc::config_error: return "ConfigError";
        case errc::degenerate_denominator: return "DegenerateDenominator";
        case errc::non_monotone: return "NonMonotone";
        case errc::hypothesis_violated: return "HypothesisViolated";
        case errc::overflow: return "Overflow";
        case errc::degenerate_indicator: return "DegenerateIndicator";
        case errc::infinite_critical: return "InfiniteCritical";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    errc code() const noexcept { return code_; }
    error_class kind() const noexcept { return classify(code_); }

private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, errc code, const std::string& what) {
    if (!cond) fail(code, what);
}

}  // namespace bpre
