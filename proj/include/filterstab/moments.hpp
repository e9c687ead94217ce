#pragma once

// Moment matrix B_{ij} = E xi(j)^i of per-state observation laws, and the
// finite-alphabet solver for f(x) = sum_y g(y) gamma(x, y) phi{y}.

#include "filterstab/error.hpp"
#include "filterstab/functions.hpp"
#include "filterstab/model.hpp"
#include "filterstab/noise.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace filterstab {

struct MomentMatrix {
    Eigen::MatrixXd entries;
    double condition_number = std::numeric_limits<double>::infinity();
    double determinant = 0.0;

    bool nonsingular(double max_condition = 1e12) const { return condition_number < max_condition; }
};

inline double raw_moment(const ObsLaw& law, int i)
{
    if (const auto* f = std::get_if<FiniteLaw>(&law)) {
        double s = 0.0;
        for (std::size_t k = 0; k < f->letters.size(); ++k) {
            s += std::pow(f->letters[k], i) * f->probs[k];
        }
        return s;
    }
    if (const auto* n = std::get_if<NormalLaw>(&law)) {
        return raw_moment(NoiseLaw{*n}, i);
    }
    return raw_moment(NoiseLaw{std::get<MultNoiseLaw>(law)}, i);
}

/// B_{ij} = E xi(j)^i for i, j = 1..d, by quadrature.
inline MomentMatrix moment_matrix(std::span<const ObsLaw> laws, std::size_t d)
{
    if (laws.size() != d || d == 0) {
        fail(ErrorKind::invalid_argument, "moment matrix needs exactly d observation laws");
    }
    MomentMatrix b;
    const auto n = static_cast<Eigen::Index>(d);
    b.entries.resize(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            b.entries(i, j) = raw_moment(laws[static_cast<std::size_t>(j)], static_cast<int>(i + 1));
        }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(b.entries);
    const auto& s = svd.singularValues();
    const double smin = s[s.size() - 1];
    b.condition_number = smin > 0.0 ? s[0] / smin : std::numeric_limits<double>::infinity();
    b.determinant = b.entries.determinant();
    return b;
}

inline constexpr double solve_g_tolerance = 1e-8;

struct GSolution {
    std::vector<double> letters;
    std::vector<double> g;
    double residual = 0.0;

    /// A bounded solution exists (residual within tolerance).
    bool solvable() const noexcept { return residual <= solve_g_tolerance; }

    /// g as a function on the alphabet, zero off it.
    ScalarFunction as_function() const
    {
        auto ls = letters;
        auto vs = g;
        double sup = 0.0;
        for (double v : vs) {
            sup = std::max(sup, std::abs(v));
        }
        return ScalarFunction::custom(
            "solved-g",
            [ls, vs](double y) {
                for (std::size_t k = 0; k < ls.size(); ++k) {
                    if (ls[k] == y) {
                        return vs[k];
                    }
                }
                return 0.0;
            },
            sup);
    }
};

/// Least-squares (minimum-norm) solution of Gamma g = f with
/// Gamma_{x,y} = gamma(x, y) phi{y}; residual = max |Gamma g - f|.
inline GSolution solve_g(const Eigen::MatrixXd& gamma, const Eigen::VectorXd& f, std::vector<double> letters = {})
{
    if (gamma.rows() != f.size() || gamma.rows() == 0 || gamma.cols() == 0) {
        fail(ErrorKind::invalid_argument, "gamma must have one row per entry of f");
    }
    if (letters.empty()) {
        for (Eigen::Index k = 0; k < gamma.cols(); ++k) {
            letters.push_back(static_cast<double>(k));
        }
    }
    Eigen::VectorXd g;
    if (gamma.rows() == gamma.cols()) {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(gamma);
        if (lu.isInvertible()) {
            g = lu.solve(f);
        }
    }
    if (g.size() == 0) {
        g = gamma.completeOrthogonalDecomposition().solve(f);
    }
    GSolution out;
    out.letters = std::move(letters);
    out.g.assign(g.data(), g.data() + g.size());
    out.residual = (gamma * g - f).cwiseAbs().maxCoeff();
    return out;
}

/// Solves for g on the alphabet of a finite-state, finite-alphabet model.
inline GSolution solve_g(const ScalarFunction& f, const HmmModel& model)
{
    const auto* ch = std::get_if<FiniteAlphabetChannel>(&model.channel.shape());
    if (!ch || !model.states) {
        fail(ErrorKind::invalid_argument, "solve_g needs finite states and a finite observation alphabet");
    }
    Eigen::VectorXd fv(static_cast<Eigen::Index>(model.dim()));
    for (std::size_t i = 0; i < model.dim(); ++i) {
        fv[static_cast<Eigen::Index>(i)] = f((*model.states)[i]);
    }
    return solve_g(ch->probs, fv, ch->letters);
}

} // namespace filterstab
