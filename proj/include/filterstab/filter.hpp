#pragma once

// The nonlinear filter
//   pi_n(dx) = int Lambda(u, dx) gamma(u, Y_n) pi_{n-1}(du) / int gamma(v, Y_n) pi_{n-1}(dv),
// on finite carriers (atoms or grid cells), with normalizers kept in log space.

#include "filterstab/discretize.hpp"
#include "filterstab/error.hpp"
#include "filterstab/functions.hpp"
#include "filterstab/measure.hpp"
#include "filterstab/model.hpp"
#include "filterstab/simulate.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace filterstab {

inline void require_filterable(const HmmModel& model)
{
    if (!model.is_finite_state()) {
        fail(ErrorKind::invalid_argument, "filtering needs a finite-state model (discretize continuous ones)");
    }
}

/// log gamma(i, y) for every state i.
inline void log_likelihoods(const HmmModel& model, double y, Eigen::Ref<Eigen::VectorXd> out)
{
    const auto d = model.dim();
    for (std::size_t i = 0; i < d; ++i) {
        out[static_cast<Eigen::Index>(i)] = model.log_gamma(i, y);
    }
}

inline Eigen::VectorXd log_likelihoods(const HmmModel& model, double y)
{
    Eigen::VectorXd out(static_cast<Eigen::Index>(model.dim()));
    log_likelihoods(model, y, out);
    return out;
}

/// In-place Bayes correction of one probability column: w <- w * gamma / c.
/// Returns log c, or -inf when the observation is impossible under w (the
/// column is then left untouched).
inline double bayes_correct(Eigen::Ref<Eigen::VectorXd> w, const Eigen::Ref<const Eigen::VectorXd>& log_gamma)
{
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    double top = neg_inf;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (w[i] > 0.0 && log_gamma[i] > top) {
            top = log_gamma[i];
        }
    }
    if (top == neg_inf) {
        return neg_inf;
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (w[i] > 0.0) {
            total += w[i] * std::exp(log_gamma[i] - top);
        }
    }
    if (!(total > 0.0)) {
        return neg_inf;
    }
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        w[i] = w[i] > 0.0 ? w[i] * std::exp(log_gamma[i] - top) / total : 0.0;
    }
    return std::log(total) + top;
}

/// Pushes every column through the kernel (W <- Lambda^T W) and renormalizes;
/// returns the largest mass correction applied.
inline double propagate_columns(const Eigen::MatrixXd& kernel, Eigen::MatrixXd& w, Eigen::MatrixXd& scratch)
{
    scratch.resize(w.rows(), w.cols());
    scratch.noalias() = kernel.transpose() * w;
    double drift = 0.0;
    for (Eigen::Index c = 0; c < scratch.cols(); ++c) {
        const double s = scratch.col(c).sum();
        drift = std::max(drift, std::abs(s - 1.0));
        if (s > 0.0) {
            scratch.col(c) /= s;
        }
    }
    w.swap(scratch);
    return drift;
}

/// One-step prediction int Lambda(u, dx) pi(du). For a grid distribution and
/// an AR(1) kernel the transition is integrated over each cell on the fly.
inline Distribution predict(const Distribution& pi, const SignalKernel& k)
{
    if (k.is_finite()) {
        if (k.dim() != pi.size()) {
            fail(ErrorKind::mismatched_support, "kernel and distribution sizes differ");
        }
        Eigen::VectorXd out = k.matrix().transpose() * pi.weights();
        return normalize(pi.carrier_ptr(), out);
    }
    const Carrier& grid = pi.carrier();
    if (!grid.is_grid()) {
        fail(ErrorKind::mismatched_support, "AR(1) prediction needs a grid distribution");
    }
    const auto n = static_cast<Eigen::Index>(grid.size());
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd row(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mass = pi.weights()[i];
        if (mass == 0.0) {
            continue;
        }
        const double inside = ar1_grid_row(k.ar1(), grid, grid[static_cast<std::size_t>(i)], row);
        if (inside > 0.0) {
            out += (mass / inside) * row;
        }
    }
    return normalize(pi.carrier_ptr(), out);
}

struct FilterStep {
    Distribution posterior;
    double normalizer;
    double log_normalizer;
};

/// pi_new(x) proportional to sum_u Lambda(u, x) gamma(u, y) pi_prev(u);
/// c = sum_v gamma(v, y) pi_prev(v).
inline FilterStep filter_step(const HmmModel& model, const Distribution& prev, double y)
{
    require_filterable(model);
    if (!prev.carrier().same_as(*model.states)) {
        fail(ErrorKind::mismatched_support, "filter state is not on the model carrier");
    }
    Eigen::VectorXd w = prev.weights();
    const double log_c = bayes_correct(w, log_likelihoods(model, y));
    if (log_c == -std::numeric_limits<double>::infinity()) {
        fail(ErrorKind::zero_likelihood, "observation " + format_double(y) + " has zero likelihood (0/0 in the filter)");
    }
    Eigen::VectorXd next = model.signal.matrix().transpose() * w;
    return {normalize(model.states, next), std::exp(log_c), log_c};
}

class FilterTrajectory {
public:
    std::vector<Distribution> posteriors;  // pi_0 .. pi_n
    std::vector<double> log_normalizers;   // log c_1 .. log c_n
    double log_likelihood = 0.0;
    double renormalization_drift = 0.0;    // largest post-prediction mass correction

    std::size_t steps() const noexcept { return log_normalizers.size(); }

    std::vector<double> normalizers() const
    {
        std::vector<double> c;
        c.reserve(log_normalizers.size());
        for (double v : log_normalizers) {
            c.push_back(std::exp(v));
        }
        return c;
    }
};

/// Runs the recursion over y_1..y_n (Y_0 = 0 is not part of `observations`).
inline FilterTrajectory run_filter(const HmmModel& model, const Distribution& init, std::span<const double> observations)
{
    require_filterable(model);
    if (!init.carrier().same_as(*model.states)) {
        fail(ErrorKind::mismatched_support, "initial law is not on the model carrier");
    }
    FilterTrajectory traj;
    traj.posteriors.reserve(observations.size() + 1);
    traj.log_normalizers.reserve(observations.size());
    traj.posteriors.push_back(init);

    const Eigen::MatrixXd& kernel = model.signal.matrix();
    Eigen::MatrixXd w = init.weights();
    Eigen::MatrixXd scratch;
    Eigen::VectorXd lg(static_cast<Eigen::Index>(model.dim()));
    for (std::size_t k = 0; k < observations.size(); ++k) {
        log_likelihoods(model, observations[k], lg);
        const double log_c = bayes_correct(w.col(0), lg);
        if (log_c == -std::numeric_limits<double>::infinity()) {
            fail(ErrorKind::zero_likelihood,
                 "observation " + format_double(observations[k]) + " at step " + std::to_string(k + 1) +
                     " has zero likelihood",
                 k + 1);
        }
        traj.renormalization_drift = std::max(traj.renormalization_drift, propagate_columns(kernel, w, scratch));
        traj.log_normalizers.push_back(log_c);
        traj.log_likelihood += log_c;
        traj.posteriors.emplace_back(model.states, w.col(0));
    }
    return traj;
}

inline FilterTrajectory run_filter(const HmmModel& model, const Distribution& init, const SimulatedPath& path)
{
    return run_filter(model, init, std::span<const double>(path.y).subspan(1));
}

/// G(i) = int g(y) gamma(i, y) phi(dy) for every state.
inline Eigen::VectorXd channel_integrals(const HmmModel& model, const ScalarFunction& g)
{
    require_filterable(model);
    Eigen::VectorXd out(static_cast<Eigen::Index>(model.dim()));
    for (std::size_t i = 0; i < model.dim(); ++i) {
        const double v = model.channel.integrate(i, (*model.states)[i], g);
        if (!std::isfinite(v)) {
            fail(ErrorKind::non_finite_result, "g is not integrable against the channel at state " + std::to_string(i));
        }
        out[static_cast<Eigen::Index>(i)] = v;
    }
    return out;
}

/// One-step predictor eta(g) = int int g(y) gamma(x, y) phi(dy) pi_prev(dx).
inline double predictor(const HmmModel& model, const Distribution& prev, const ScalarFunction& g)
{
    const Eigen::VectorXd integrals = channel_integrals(model, g);
    return prev.weights().dot(integrals);
}

/// rho_0 .. rho_n kept as logs; rho_0 = 1.
struct RhoSeries {
    std::vector<double> log_values;

    std::vector<double> values() const
    {
        std::vector<double> v;
        v.reserve(log_values.size());
        for (double l : log_values) {
            v.push_back(std::exp(l));
        }
        return v;
    }
};

/// rho_n = prod_{k<=n} c_k(nu) / c_k(nu_bar): the density of the observation
/// law under the true prior against the one under the wrong prior.
inline RhoSeries likelihood_ratio(const FilterTrajectory& traj, const FilterTrajectory& traj_bar)
{
    if (traj.steps() != traj_bar.steps()) {
        fail(ErrorKind::invalid_argument, "trajectories have different lengths");
    }
    RhoSeries rho;
    rho.log_values.reserve(traj.steps() + 1);
    rho.log_values.push_back(0.0);
    double acc = 0.0;
    for (std::size_t k = 0; k < traj.steps(); ++k) {
        if (traj_bar.log_normalizers[k] == -std::numeric_limits<double>::infinity()) {
            fail(ErrorKind::zero_rho, "path is impossible under the wrong prior", k + 1);
        }
        acc += traj.log_normalizers[k] - traj_bar.log_normalizers[k];
        rho.log_values.push_back(acc);
    }
    return rho;
}

} // namespace filterstab
