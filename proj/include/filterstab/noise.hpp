#pragma once

// Observation noise laws: Gaussian, the heavy-tailed multiplicative-noise
// density p(x) = (rho/|x|^3) exp(-rho/x^2), and finite-alphabet laws.

#include "filterstab/error.hpp"
#include "filterstab/format.hpp"
#include "filterstab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace filterstab {

using Rng = std::mt19937_64;

struct NormalLaw {
    double mean = 0.0;
    double std = 1.0;
};

/// Law of xi in Y = X * xi.
struct MultNoiseLaw {
    double rho = 1.0;
};

struct FiniteLaw {
    std::vector<double> letters;
    std::vector<double> probs;
};

using NoiseLaw = std::variant<NormalLaw, MultNoiseLaw>;
using ObsLaw = std::variant<NormalLaw, MultNoiseLaw, FiniteLaw>;

inline double mult_noise_log_density(double x, double rho)
{
    if (x == 0.0) {
        return -std::numeric_limits<double>::infinity();
    }
    const double ax = std::abs(x);
    return std::log(rho) - 3.0 * std::log(ax) - rho / (x * x);
}

/// p(x) = (rho/|x|^3) exp(-rho/x^2), p(0) = 0.
inline double mult_noise_density(double x, double rho)
{
    if (!(rho > 0.0)) {
        fail(ErrorKind::invalid_argument, "rho must be positive");
    }
    return std::exp(mult_noise_log_density(x, rho));
}

inline double normal_log_density(double x, double mean, double sd)
{
    const double z = (x - mean) / sd;
    return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

inline double normal_cdf(double z)
{
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

/// P(a < Z <= b) for standard normal Z, computed on the side that avoids
/// cancellation.
inline double normal_interval_mass(double a, double b)
{
    if (a > 0.0) {
        return 0.5 * (std::erfc(a / std::numbers::sqrt2) - std::erfc(b / std::numbers::sqrt2));
    }
    if (b < 0.0) {
        return 0.5 * (std::erfc(-b / std::numbers::sqrt2) - std::erfc(-a / std::numbers::sqrt2));
    }
    return 1.0 - 0.5 * std::erfc(b / std::numbers::sqrt2) - 0.5 * std::erfc(-a / std::numbers::sqrt2);
}

inline void validate(const NoiseLaw& law)
{
    std::visit(
        [](const auto& l) {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, NormalLaw>) {
                if (!(l.std > 0.0) || !std::isfinite(l.mean)) {
                    fail(ErrorKind::invalid_argument, "normal law needs finite mean and positive std");
                }
            } else {
                if (!(l.rho > 0.0)) {
                    fail(ErrorKind::invalid_argument, "rho must be positive");
                }
            }
        },
        law);
}

inline double log_pdf(const NoiseLaw& law, double z)
{
    if (const auto* n = std::get_if<NormalLaw>(&law)) {
        return normal_log_density(z, n->mean, n->std);
    }
    return mult_noise_log_density(z, std::get<MultNoiseLaw>(law).rho);
}

inline double pdf(const NoiseLaw& law, double z)
{
    return std::exp(log_pdf(law, z));
}

inline double sample(const NoiseLaw& law, Rng& rng)
{
    if (const auto* n = std::get_if<NormalLaw>(&law)) {
        return std::normal_distribution<double>(n->mean, n->std)(rng);
    }
    // P(|xi| <= t) = exp(-rho/t^2), inverted on U in (0, 1).
    const double rho = std::get<MultNoiseLaw>(law).rho;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(rng);
    while (u <= 0.0) {
        u = unif(rng);
    }
    const double magnitude = std::sqrt(rho / -std::log(u));
    return unif(rng) < 0.5 ? -magnitude : magnitude;
}

/// Moments E|xi|^r exist exactly for r below this order.
inline double moment_limit(const NoiseLaw& law)
{
    return std::holds_alternative<NormalLaw>(law) ? std::numeric_limits<double>::infinity() : 2.0;
}

/// E f(xi) by adaptive quadrature. `growth` is the polynomial order of |f|;
/// orders at or past the tail index of the law diverge.
template <class F>
double expectation(const NoiseLaw& law, F&& f, std::optional<double> growth = 0.0)
{
    if (growth && *growth >= moment_limit(law)) {
        fail(ErrorKind::non_finite_result, "integrand grows too fast for the noise tails");
    }
    if (const auto* n = std::get_if<NormalLaw>(&law)) {
        const double m = n->mean;
        const double s = n->std;
        // Split at the mode so the adaptive rule sees each half separately.
        auto g = [&](double z) { return f(z) * std::exp(normal_log_density(z, m, s)); };
        return integrate_interval(g, m - 38.0 * s, m).value + integrate_interval(g, m, m + 38.0 * s).value;
    }
    const double rho = std::get<MultNoiseLaw>(law).rho;
    auto pos = [&](double z) { return f(z) * std::exp(mult_noise_log_density(z, rho)); };
    auto neg = [&](double z) { return f(-z) * std::exp(mult_noise_log_density(z, rho)); };
    return integrate_half_line(pos).value + integrate_half_line(neg).value;
}

/// E xi^i, i >= 1.
inline double raw_moment(const NoiseLaw& law, int i)
{
    if (static_cast<double>(i) >= moment_limit(law)) {
        fail(ErrorKind::moment_divergence, "moment of order " + std::to_string(i) + " is infinite");
    }
    try {
        return expectation(law, [i](double z) { return std::pow(z, i); }, static_cast<double>(i));
    } catch (const Error& e) {
        fail(ErrorKind::moment_divergence, e.what());
    }
}

/// E exp(i t xi) by quadrature of the real and imaginary parts.
inline std::complex<double> characteristic(const NoiseLaw& law, double t)
{
    const double re = expectation(law, [t](double z) { return std::cos(t * z); });
    const double im = expectation(law, [t](double z) { return std::sin(t * z); });
    return {re, im};
}

/// E|xi| for the multiplicative-noise law, by quadrature.
inline double abs_mean_xi(double rho)
{
    return expectation(NoiseLaw{MultNoiseLaw{rho}}, [](double z) { return std::abs(z); }, 1.0);
}

inline std::string describe(const NoiseLaw& law)
{
    if (const auto* n = std::get_if<NormalLaw>(&law)) {
        return "normal(" + format_double(n->mean) + ";" + format_double(n->std) + ")";
    }
    return "multnoise(" + format_double(std::get<MultNoiseLaw>(law).rho) + ")";
}

} // namespace filterstab
