#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qgamma/types.hpp"

namespace qgamma {

/// Local model K(x) = K(xi) + sum_j a_j |x_j - xi_j|^beta near a point.
struct PowerExpansion {
    double beta = 2.0;
    std::vector<double> coefficients;  ///< a_j, one per coordinate
};

/// Perturbation profile K on R^n with optional analytic derivatives.
struct CurvatureField {
    std::string name;
    int n = 0;
    ScalarField eval;
    VectorField grad;     ///< empty: central differences
    MatrixField hessian;  ///< empty: central differences; non-finite entries mark a singular point
    double eta = 1.0;     ///< radius beyond which <K'(x), x> < 0 is claimed
    double tail_value = 0.0;  ///< K at infinity (NaN if unknown)
    /// Explicit power-law structure at a point, if K carries one there.
    std::function<std::optional<PowerExpansion>(const PointN&)> expansion;

    double value(const PointN& x) const { return eval(x); }
    PointN gradient(const PointN& x) const;
    MatrixN hessian_at(const PointN& x) const;
    double laplacian(const PointN& x) const { return hessian_at(x).trace(); }
    bool finite_difference_derivatives() const { return !grad || !hessian; }
};

/// One closed-form term of a K expression.
struct CurvatureTerm {
    enum class Kind { gaussian, rational, cusp, constant };
    Kind kind = Kind::constant;
    double amplitude = 1.0;
    PointN center;
    double width = 1.0;
    double power = 1.5;  ///< cusp exponent
};

/// Sum of closed-form terms with exact gradient and Hessian:
///   gaussian  A exp(-|y|^2/w^2)
///   rational  A / (1 + |y|^2/w^2)
///   cusp      A exp(-sum_j |y_j|^power / w^power)
///   constant  A
/// with y = x - center.
CurvatureField make_term_sum(std::string name, int n, std::vector<CurvatureTerm> terms, double eta);

/// Built-in library: "rational", "gaussian", "two_bump", "cusp", "constant".
CurvatureField builtin_curvature(const std::string& name, int n);
std::vector<std::string> builtin_curvature_names();

/// Width of each Gaussian in the two-bump fixture.
inline constexpr double kTwoBumpWidth = 0.75;

}  // namespace qgamma
