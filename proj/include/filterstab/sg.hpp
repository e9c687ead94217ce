#pragma once

// Serial Gaussian (SG) densities: a Gaussian modulated by an even polynomial,
//   q(x) = (sum_i alpha_i x^{2i} / (sigma^{2i} C_{2i})) N(x; 0, sigma^2),
// with C_{2i} = (2i-1)!! so that every term integrates to one.

#include "filterstab/error.hpp"
#include "filterstab/format.hpp"
#include "filterstab/noise.hpp"
#include "filterstab/quadrature.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace filterstab {

struct SgParams {
    double sigma = 1.0;
    std::vector<double> alpha{1.0};
};

inline void validate(const SgParams& p)
{
    if (!(p.sigma > 0.0) || !std::isfinite(p.sigma)) {
        fail(ErrorKind::invalid_argument, "SG sigma must be positive");
    }
    if (p.alpha.empty()) {
        fail(ErrorKind::invalid_argument, "SG needs at least one weight");
    }
    double total = 0.0;
    for (double a : p.alpha) {
        if (!(a >= 0.0)) {
            fail(ErrorKind::invalid_argument, "SG weights must be nonnegative");
        }
        total += a;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        fail(ErrorKind::invalid_argument, "SG weights must sum to 1");
    }
}

/// C_{2i} = (2i-1)!!, the 2i-th moment of a standard normal.
inline double sg_normalizer(int i)
{
    if (i < 0) {
        fail(ErrorKind::invalid_argument, "SG normalizer index must be nonnegative");
    }
    double c = 1.0;
    for (int k = 2 * i - 1; k > 1; k -= 2) {
        c *= k;
    }
    return c;
}

inline double sg_log_density(double x, const SgParams& p)
{
    const double u2 = (x / p.sigma) * (x / p.sigma);
    double poly = 0.0;
    double power = 1.0;
    for (std::size_t i = 0; i < p.alpha.size(); ++i) {
        if (p.alpha[i] != 0.0) {
            poly += p.alpha[i] * power / sg_normalizer(static_cast<int>(i));
        }
        power *= u2;
    }
    if (poly <= 0.0) {
        return -std::numeric_limits<double>::infinity();
    }
    return std::log(poly) + normal_log_density(x, 0.0, p.sigma);
}

inline double sg_density(double x, const SgParams& p)
{
    return std::exp(sg_log_density(x, p));
}

/// Mixture draw: pick term i, then |X|/sigma is chi-distributed with 2i+1
/// degrees of freedom.
inline double sg_sample(const SgParams& p, Rng& rng)
{
    std::discrete_distribution<std::size_t> pick(p.alpha.begin(), p.alpha.end());
    const std::size_t i = pick(rng);
    std::chi_squared_distribution<double> chi2(static_cast<double>(2 * i + 1));
    const double magnitude = p.sigma * std::sqrt(chi2(rng));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    return unif(rng) < 0.5 ? -magnitude : magnitude;
}

/// SG shape shifted to `mean`; a Gaussian prior is alpha = (1).
struct ContinuousPrior {
    SgParams shape;
    double mean = 0.0;

    static ContinuousPrior gaussian(double mean, double sd) { return {SgParams{sd, {1.0}}, mean}; }

    double log_density(double x) const { return sg_log_density(x - mean, shape); }
    double density(double x) const { return std::exp(log_density(x)); }
    double sample(Rng& rng) const { return mean + sg_sample(shape, rng); }

    std::size_t top_degree() const
    {
        std::size_t d = shape.alpha.size() - 1;
        while (d > 0 && shape.alpha[d] == 0.0) {
            --d;
        }
        return d;
    }

    std::string id() const
    {
        std::string s = "sg(sigma=" + format_double(shape.sigma) + ";alpha=";
        for (std::size_t i = 0; i < shape.alpha.size(); ++i) {
            s += (i ? "/" : "") + format_double(shape.alpha[i]);
        }
        return s + ";mean=" + format_double(mean) + ")";
    }
};

inline bool operator==(const ContinuousPrior& a, const ContinuousPrior& b)
{
    return a.mean == b.mean && a.shape.sigma == b.shape.sigma && a.shape.alpha == b.shape.alpha;
}

/// sup_x q(x)/q_bar(x), or empty when the ratio is unbounded. Bounded exactly
/// when q_bar has the heavier Gaussian tail (sigma_bar > sigma) and does not
/// vanish where q is positive, or when the two laws coincide.
inline std::optional<double> prior_ratio_sup(const ContinuousPrior& nu, const ContinuousPrior& nu_bar)
{
    validate(nu.shape);
    validate(nu_bar.shape);
    if (nu == nu_bar) {
        return 1.0;
    }
    if (!(nu_bar.shape.sigma > nu.shape.sigma)) {
        return std::nullopt;
    }
    if (nu_bar.shape.alpha[0] == 0.0 && nu.density(nu_bar.mean) > 0.0) {
        return std::nullopt;
    }
    auto log_ratio = [&](double x) { return nu.log_density(x) - nu_bar.log_density(x); };
    const double centre = 0.5 * (nu.mean + nu_bar.mean);
    const double half = 40.0 * nu_bar.shape.sigma + std::abs(nu.mean - nu_bar.mean);
    constexpr int scan = 40001;
    const double step = 2.0 * half / (scan - 1);
    double best_x = centre - half;
    double best = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < scan; ++k) {
        const double x = centre - half + step * k;
        const double v = log_ratio(x);
        if (v > best) {
            best = v;
            best_x = x;
        }
    }
    auto neg = [&](double x) { return -log_ratio(x); };
    const auto refined = boost::math::tools::brent_find_minima(neg, best_x - step, best_x + step, 52);
    return std::exp(std::max(best, -refined.second));
}

/// E_bar (dnu/dnu_bar)^p = int q^p q_bar^{1-p} dx; +inf when it diverges.
inline double prior_ratio_moment(const ContinuousPrior& nu, const ContinuousPrior& nu_bar, double p)
{
    auto integrand = [&](double x) {
        const double lq = nu.log_density(x);
        if (lq == -std::numeric_limits<double>::infinity()) {
            return 0.0;
        }
        return std::exp(p * lq + (1.0 - p) * nu_bar.log_density(x));
    };
    const double centre = nu.mean;
    const double half = 40.0 * std::max(nu.shape.sigma, nu_bar.shape.sigma) + std::abs(nu.mean - nu_bar.mean);
    try {
        return integrate_interval(integrand, centre - half, centre).value +
               integrate_interval(integrand, centre, centre + half).value;
    } catch (const Error&) {
        return std::numeric_limits<double>::infinity();
    }
}

} // namespace filterstab
