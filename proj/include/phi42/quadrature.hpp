#pragma once

#include <cmath>
#include <string>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "phi42/core.hpp"

namespace phi42 {

/// Adaptive Gauss-Kronrod (7/15) on [a, b].
///
/// Throws QuadratureFailure when the error estimate exceeds
/// max(rel_tol * |I|, abs_tol) after max_depth bisections.
template <class F>
double integrate_adaptive(F&& f, double a, double b, double rel_tol = 1e-4, double abs_tol = 1e-14,
                          unsigned max_depth = 18) {
    if (!(b > a)) return 0.0;
    double err = 0.0;
    const double value =
        boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, max_depth, rel_tol * 0.1, &err);
    if (!std::isfinite(value) || err > std::max(rel_tol * std::abs(value), abs_tol))
        throw QuadratureFailure("error estimate " + std::to_string(err) + " for value " + std::to_string(value));
    return value;
}

/// Fixed N-point Gauss-Legendre rule on [a, b].
template <unsigned N, class F>
double integrate_gauss(F&& f, double a, double b) {
    if (!(b > a)) return 0.0;
    return boost::math::quadrature::gauss<double, N>::integrate(f, a, b);
}

}  // namespace phi42
