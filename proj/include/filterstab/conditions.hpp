#pragma once

// Checks of the sufficient conditions for predictor stability: bounded g,
// bounded or p-integrable prior ratio, and a finite-horizon moment surrogate
// sup_n E_bar |g(Y_n)|^{1+eps} for uniform integrability.

#include "filterstab/error.hpp"
#include "filterstab/filter.hpp"
#include "filterstab/functions.hpp"
#include "filterstab/measure.hpp"
#include "filterstab/series.hpp"
#include "filterstab/sg.hpp"
#include "filterstab/simulate.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace filterstab {

struct ConditionReport {
    bool admissible = true;
    std::string admissibility_note;

    bool g_bounded = false;
    std::optional<double> g_bound;

    bool ratio_bounded = false;
    std::optional<double> ratio_sup;
    std::optional<std::pair<double, double>> ratio_p_norm;   // (p, E_bar ratio^p)

    std::optional<std::pair<double, double>> g_ui_moment;    // (q, sup_{n<=horizon} E_bar|g(Y_n)|^q)
    std::string ui_method;
    bool ui_estimate_only = false;
    std::size_t horizon = 0;
};

struct ConditionOptions {
    std::size_t horizon = 100;
    double p = 2.0;
    double eps = 0.5;
    std::size_t mc_paths = 2000;
    std::uint64_t seed = 1;
};

namespace detail {

inline double ui_moment_exact(const StabilityProblem& pb, const ScalarFunction& gq, std::size_t horizon)
{
    const Eigen::VectorXd moments = channel_integrals(pb.filter_model, gq);
    Eigen::VectorXd mu = pb.nu_bar.weights();
    double sup = 0.0;
    for (std::size_t n = 1; n <= horizon; ++n) {
        sup = std::max(sup, mu.dot(moments));
        mu = pb.filter_model.signal.matrix().transpose() * mu;
        mu /= mu.sum();
    }
    return sup;
}

inline double ui_moment_sampled(const StabilityProblem& pb, const ScalarFunction& gq, const ConditionOptions& opt)
{
    std::vector<CompensatedSum> sums(opt.horizon);
    for (std::size_t t = 0; t < opt.mc_paths; ++t) {
        Rng rng = trial_rng(opt.seed, t);
        const auto path = simulate_path(pb.truth_model, opt.horizon, rng, pb.truth_nu_bar);
        for (std::size_t n = 1; n <= opt.horizon; ++n) {
            sums[n - 1].add(gq(path.y[n]));
        }
    }
    double sup = 0.0;
    for (const auto& s : sums) {
        sup = std::max(sup, s.value() / static_cast<double>(opt.mc_paths));
    }
    return sup;
}

} // namespace detail

inline ConditionReport check_conditions(const StabilityProblem& pb, const ScalarFunction& g,
                                        const ConditionOptions& opt = {})
{
    ConditionReport r;
    r.horizon = opt.horizon;

    // (i) bound of g where observations can land.
    if (pb.filter_model.channel.is_finite_alphabet()) {
        const auto& ch = std::get<FiniteAlphabetChannel>(pb.filter_model.channel.shape());
        double bound = 0.0;
        for (std::size_t k = 0; k < ch.letters.size(); ++k) {
            if (ch.probs.col(static_cast<Eigen::Index>(k)).maxCoeff() > 0.0) {
                bound = std::max(bound, std::abs(g(ch.letters[k])));
            }
        }
        r.g_bounded = true;
        r.g_bound = bound;
    } else if (auto s = g.sup_abs()) {
        r.g_bounded = true;
        r.g_bound = *s;
    }

    // (ii), (iii) prior ratio.
    const auto* prior = std::get_if<ContinuousPrior>(&pb.truth_nu);
    const auto* prior_bar = std::get_if<ContinuousPrior>(&pb.truth_nu_bar);
    if (prior && prior_bar) {
        r.ratio_sup = prior_ratio_sup(*prior, *prior_bar);
        r.ratio_bounded = r.ratio_sup.has_value();
        r.ratio_p_norm = std::make_pair(opt.p, prior_ratio_moment(*prior, *prior_bar, opt.p));
    } else {
        try {
            const auto dr = density_ratio(pb.nu, pb.nu_bar, opt.p);
            r.ratio_bounded = true;
            r.ratio_sup = dr.sup_bound;
            r.ratio_p_norm = dr.p_norm;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::not_absolutely_continuous) {
                throw;
            }
            r.admissible = false;
            r.admissibility_note = e.what();
            return r;
        }
    }

    // Uniform-integrability surrogate.
    const double q = 1.0 + opt.eps;
    const auto growth = g.growth_order();
    const auto sup = g.sup_abs();
    const ScalarFunction gq = ScalarFunction::custom(
        "|" + g.id() + "|^" + format_double(q), [g, q](double y) { return std::pow(std::abs(g(y)), q); },
        sup ? std::optional<double>(std::pow(*sup, q)) : std::nullopt,
        growth ? std::optional<double>(*growth * q) : std::nullopt);
    try {
        r.g_ui_moment = std::make_pair(q, detail::ui_moment_exact(pb, gq, opt.horizon));
        r.ui_method = pb.truth_model.is_finite_state() ? "exact-recursion" : "exact-recursion(grid)";
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::non_finite_result) {
            throw;
        }
        r.g_ui_moment = std::make_pair(q, detail::ui_moment_sampled(pb, gq, opt));
        r.ui_method = "monte-carlo";
        r.ui_estimate_only = true;
    }
    return r;
}

} // namespace filterstab
