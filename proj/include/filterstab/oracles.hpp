#pragma once

// Reference answers computed without the filter recursion: brute-force sums
// over every signal path, and the Kalman recursion for the linear-Gaussian
// model with lagged observations Y_n = X_{n-1} + xi_n.

#include "filterstab/error.hpp"
#include "filterstab/measure.hpp"
#include "filterstab/model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace filterstab {

inline constexpr double max_enumeration_terms = 1e7;

struct PathEnumeration {
    Eigen::VectorXd final_marginal;   // unnormalized P(X_n = x, y_1..y_n)
    Eigen::VectorXd initial_marginal; // unnormalized P(X_0 = x, y_1..y_n)
    double total = 0.0;               // density of y_1..y_n
};

/// Sums nu(x_0) prod_k gamma(x_{k-1}, y_k) Lambda(x_{k-1}, x_k) over all
/// d^{n+1} signal paths.
inline PathEnumeration enumerate_signal_paths(const HmmModel& model, const Distribution& init,
                                              std::span<const double> observations)
{
    if (!model.is_finite_state()) {
        fail(ErrorKind::invalid_argument, "enumeration needs a finite-state model");
    }
    const std::size_t d = model.dim();
    const std::size_t n = observations.size();
    if (std::pow(static_cast<double>(d), static_cast<double>(n + 1)) > max_enumeration_terms) {
        fail(ErrorKind::too_large, std::to_string(d) + "^" + std::to_string(n + 1) + " signal paths");
    }
    const Eigen::MatrixXd& lambda = model.signal.matrix();
    Eigen::MatrixXd gam(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < d; ++i) {
            gam(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = model.gamma(i, observations[k]);
        }
    }
    PathEnumeration out;
    out.final_marginal = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    out.initial_marginal = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    std::vector<std::size_t> idx(n + 1, 0);
    for (;;) {
        double w = init[idx[0]];
        for (std::size_t k = 1; k <= n && w != 0.0; ++k) {
            const auto prev = static_cast<Eigen::Index>(idx[k - 1]);
            w *= gam(prev, static_cast<Eigen::Index>(k - 1)) * lambda(prev, static_cast<Eigen::Index>(idx[k]));
        }
        out.final_marginal[static_cast<Eigen::Index>(idx[n])] += w;
        out.initial_marginal[static_cast<Eigen::Index>(idx[0])] += w;
        out.total += w;
        std::size_t pos = 0;
        while (pos <= n && ++idx[pos] == d) {
            idx[pos] = 0;
            ++pos;
        }
        if (pos > n) {
            break;
        }
    }
    return out;
}

/// P(X_n = x | y_1..y_n) by exhaustive enumeration.
inline Distribution enumerate_posterior_oracle(const HmmModel& model, const Distribution& init,
                                               std::span<const double> observations)
{
    const auto e = enumerate_signal_paths(model, init, observations);
    return normalize(model.states, e.final_marginal);
}

/// P(X_0 = x | y_1..y_n) by exhaustive enumeration.
inline Distribution enumerate_initial_posterior(const HmmModel& model, const Distribution& init,
                                                std::span<const double> observations)
{
    const auto e = enumerate_signal_paths(model, init, observations);
    return normalize(model.states, e.initial_marginal);
}

struct GaussianMoments {
    double mean;
    double variance;
};

/// Exact conditional moments of X_n given y_1..y_n for X_n = a X_{n-1} + b w_n,
/// Y_n = X_{n-1} + s xi_n. Each observation first corrects X_{n-1}, then the
/// corrected law is propagated one step. An infinite `obs_noise_std` means no
/// information.
inline std::vector<GaussianMoments> kalman_oracle(double a, double b, double obs_noise_std, double prior_mean,
                                                  double prior_var, std::span<const double> observations)
{
    if (!(prior_var >= 0.0) || !(b >= 0.0) || !(obs_noise_std > 0.0)) {
        fail(ErrorKind::invalid_argument, "Kalman oracle needs nonnegative variances and positive noise");
    }
    std::vector<GaussianMoments> out;
    out.reserve(observations.size() + 1);
    double m = prior_mean;
    double p = prior_var;
    out.push_back({m, p});
    const double r = obs_noise_std * obs_noise_std;
    for (double y : observations) {
        const double gain = std::isinf(r) ? 0.0 : p / (p + r);
        const double m_corr = m + gain * (y - m);
        const double p_corr = (1.0 - gain) * p;
        m = a * m_corr;
        p = a * a * p_corr + b * b;
        out.push_back({m, p});
    }
    return out;
}

} // namespace filterstab
