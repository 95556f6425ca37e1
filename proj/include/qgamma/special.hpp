#pragma once

#include <complex>
#include <functional>
#include <vector>

#include "qgamma/types.hpp"

namespace qgamma::special {

/// log Gamma(z) for Re z > 0. The imaginary part is only defined modulo
/// 2*pi; callers exponentiate combinations of these values.
std::complex<double> log_gamma(std::complex<double> z);

/// Gamma(a)/Gamma(b) for positive real a, b.
double gamma_ratio(double a, double b);

/// Surface area of the unit sphere S^{d-1} in R^d.
double sphere_area(int d);

/// Euler Beta function B(a, b).
double beta(double a, double b);

/// Adaptive 15/31-point Gauss-Kronrod on [a, b]. Unlike a purely relative
/// test, the target is tol * (L1 norm of the integrand on [a, b]), so
/// integrals that cancel to nearly zero still terminate.
double integrate_gk(const std::function<double(double)>& f, double a, double b, double tol,
                    int max_depth = 12);

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int count, std::vector<double>& x, std::vector<double>& w);

/// Product rule on S^{n-1}: n = 1 {+1, -1}; n = 2 midpoint trapezoid with
/// circle_nodes points; n = 3 Gauss-Legendre in cos(theta) x trapezoid in phi.
void sphere_rule(int n, int circle_nodes, int polar_nodes, int azimuth_nodes, std::vector<PointN>& dirs,
                 std::vector<double>& weights);

}  // namespace qgamma::special
