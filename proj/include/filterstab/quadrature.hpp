#pragma once

// Thin wrappers over Boost.Math adaptive quadrature.

#include "filterstab/error.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>

namespace filterstab {

struct Quadrature {
    double value;
    double error;
};

template <class F>
Quadrature integrate_interval(F&& f, double a, double b, double tol = 1e-13)
{
    double err = 0.0;
    const double v =
        boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, tol, &err);
    if (!std::isfinite(v)) {
        fail(ErrorKind::non_finite_result, "quadrature diverged on a finite interval");
    }
    return {v, err};
}

/// Integral over (a, infinity) with the exp-sinh rule, suited to slowly
/// decaying tails.
template <class F>
Quadrature integrate_half_line(F&& f, double a = 0.0, double tol = 1e-12)
{
    boost::math::quadrature::exp_sinh<double> rule;
    double err = 0.0;
    double l1 = 0.0;
    double v = 0.0;
    try {
        v = rule.integrate(f, a, std::numeric_limits<double>::infinity(), tol, &err, &l1);
    } catch (const std::exception& e) {
        fail(ErrorKind::non_finite_result, std::string("half-line quadrature failed: ") + e.what());
    }
    if (!std::isfinite(v)) {
        fail(ErrorKind::non_finite_result, "half-line quadrature diverged");
    }
    return {v, err};
}

} // namespace filterstab
