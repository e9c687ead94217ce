#pragma once

#include "filterstab/error.hpp"
#include "filterstab/model.hpp"

#include <optional>
#include <string>

namespace filterstab {

/// Two-sided density bounds of a finite kernel w.r.t. counting measure,
/// lambda_* <= lambda(u, x) <= lambda^*, and the averaged relaxation
/// lambda_circ = sum_u mu(u) min_x lambda(u, x) with mu invariant.
struct MixingReport {
    double lambda_star = 0.0;
    double lambda_sup = 0.0;
    std::optional<double> lambda_circ;
    double rate_star = 0.0;
    std::optional<double> rate_circ;
    std::string note;

    bool mixing() const noexcept { return lambda_star > 0.0; }
};

inline MixingReport mixing_constants(const SignalKernel& k)
{
    if (k.ar1_source()) {
        // The essential infimum of a gridded Gaussian kernel is not a
        // meaningful discretization target.
        fail(ErrorKind::invalid_argument, "mixing constants are defined for genuine finite kernels only");
    }
    const Eigen::MatrixXd& m = k.matrix();
    MixingReport r;
    r.lambda_star = m.minCoeff();
    r.lambda_sup = m.maxCoeff();
    r.rate_star = r.lambda_star > 0.0 ? -r.lambda_star / r.lambda_sup : 0.0;
    try {
        const Distribution mu = stationary_distribution(k);
        double circ = 0.0;
        for (Eigen::Index u = 0; u < m.rows(); ++u) {
            circ += mu.weights()[u] * m.row(u).minCoeff();
        }
        r.lambda_circ = circ;
        r.rate_circ = circ > 0.0 ? -circ / r.lambda_sup : 0.0;
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::no_convergence) {
            throw;
        }
        r.note = e.what();
    }
    return r;
}

} // namespace filterstab
