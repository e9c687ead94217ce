#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace filterstab {

enum class ErrorKind {
    invalid_argument,
    mismatched_support,
    zero_mass,
    not_absolutely_continuous,
    non_finite_result,
    bad_stochastic_matrix,
    unsupported_noise_family,
    no_convergence,
    zero_likelihood,
    zero_rho,
    mass_leak,
    too_large,
    moment_divergence,
    char_zero,
    degenerate_series,
    config_invalid,
    partial_failure,
    io_failure,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::invalid_argument: return "InvalidArgument";
    case ErrorKind::mismatched_support: return "MismatchedSupport";
    case ErrorKind::zero_mass: return "ZeroMass";
    case ErrorKind::not_absolutely_continuous: return "NotAbsolutelyContinuous";
    case ErrorKind::non_finite_result: return "NonFiniteResult";
    case ErrorKind::bad_stochastic_matrix: return "BadStochasticMatrix";
    case ErrorKind::unsupported_noise_family: return "UnsupportedNoiseFamily";
    case ErrorKind::no_convergence: return "NoConvergence";
    case ErrorKind::zero_likelihood: return "ZeroLikelihood";
    case ErrorKind::zero_rho: return "ZeroRho";
    case ErrorKind::mass_leak: return "MassLeak";
    case ErrorKind::too_large: return "TooLarge";
    case ErrorKind::moment_divergence: return "MomentDivergence";
    case ErrorKind::char_zero: return "CharZero";
    case ErrorKind::degenerate_series: return "DegenerateSeries";
    case ErrorKind::config_invalid: return "ConfigInvalid";
    case ErrorKind::partial_failure: return "PartialFailure";
    case ErrorKind::io_failure: return "IoFailure";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a kind so callers can branch
/// on it; `step` is set for errors tied to a filter step.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message, std::optional<std::size_t> step = std::nullopt)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), step_(step)
    {
    }

    ErrorKind kind() const noexcept { return kind_; }
    std::optional<std::size_t> step() const noexcept { return step_; }

private:
    ErrorKind kind_;
    std::optional<std::size_t> step_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message,
                              std::optional<std::size_t> step = std::nullopt)
{
    throw Error(kind, message, step);
}

} // namespace filterstab
