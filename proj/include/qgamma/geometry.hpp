#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "qgamma/types.hpp"

namespace qgamma {

/// Dimension n, order gamma in (0, n/2) and the derived critical exponents.
struct ProblemParams {
    int n = 0;
    double gamma = 0.0;
    double p = 0.0;         ///< (n + 2gamma) / (n - 2gamma)
    double two_star = 0.0;  ///< 2n / (n - 2gamma) = p + 1

    /// n - 2gamma: decay rate of the bubble profile.
    double bubble_decay() const { return n - 2.0 * gamma; }
};

/// Validates 1 <= n <= 3 and 0 < gamma < n/2; throws ValidationError otherwise.
ProblemParams make_params(int n, double gamma);

/// Radial profile f(|x|) sampled on strictly increasing positive radii.
///
/// Beyond the last node the profile is continued as a power law with rate
/// `decay_exponent` (f ~ r^decay_exponent); below the first node it is
/// continued by the even quadratic a + b r^2 through the first two nodes.
/// When `profile` is set it is used for exact evaluation instead of
/// interpolating the samples.
struct RadialFunction {
    std::vector<double> nodes;
    std::vector<double> values;
    double decay_exponent = -std::numeric_limits<double>::infinity();
    std::function<double(double)> profile;

    /// Interpolation data for sample-only functions (built by the factories).
    std::shared_ptr<const class LogSpline> spline;

    /// Samples f at the nodes; keeps f as the exact profile when requested.
    static RadialFunction sample(std::function<double(double)> f, std::vector<double> nodes,
                                 double decay_exponent, bool keep_profile = true);
    /// Sample-only function; interpolated by a natural cubic spline in log r.
    static RadialFunction from_samples(std::vector<double> nodes, std::vector<double> values,
                                       double decay_exponent);

    /// Checks the invariants (sizes, monotone positive nodes, finite values).
    void validate() const;

    /// Value at any radius r >= 0, with the extrapolation rules above.
    double operator()(double r) const;
};

/// count radii spaced evenly in log r over [r_min, r_max].
std::vector<double> log_nodes(double r_min, double r_max, std::size_t count);

struct RadialTransformOptions {
    double log_step = 0.04;     ///< spacing of the internal log-radius grid
    double bias = std::numeric_limits<double>::quiet_NaN();  ///< Mellin line Re s; NaN = auto
    double tail_digits = 40.0;  ///< grid extends until the weighted tails fall below e^-tail_digits
    double tolerance = 1e-9;    ///< accepted relative size of spectral / periodic leakage
};

/// (-Delta)^gamma of a radial function, evaluated at the input nodes.
///
/// Works on the Mellin side of the radial Fourier transform: r^{-s} is an
/// eigenfunction of the Fourier multiplier |xi|^{2gamma} with eigenvalue
///   4^gamma Gamma((s+2gamma)/2) Gamma((n-s)/2) / (Gamma(s/2) Gamma((n-s-2gamma)/2))
/// on 0 < Re s < n - 2gamma. The profile is expanded along one such line by
/// an FFT on a log-spaced grid (forward transform), multiplied by the
/// eigenvalue, and resummed (inverse transform). The returned function keeps
/// the trigonometric interpolant as its `profile`.
///
/// Throws AccuracyError when the tails or the high-frequency content are not
/// resolved, with the leakage estimate attached.
RadialFunction frac_laplacian_radial(const RadialFunction& f, const ProblemParams& params,
                                     const RadialTransformOptions& options = {});

/// Eigenvalue of (-Delta)^gamma on r^{-s} in R^n (real s in the valid strip).
double power_law_multiplier(double s, const ProblemParams& params);

/// Positive normalization of the singular integral:
/// 4^gamma Gamma(n/2+gamma) / (pi^{n/2} |Gamma(-gamma)|).
double pv_constant(int n, double gamma);

struct PvOptions {
    double tolerance = 1e-10;  ///< relative tolerance of the radial quadrature
    int angular_nodes = 24;    ///< trapezoid nodes in the azimuth (n = 3)
    PointN focus;              ///< pole direction for the angular frame; empty = origin
    double taylor_radius = 1e-3;
};

/// Direct singular-integral evaluation of (-Delta)^gamma f at x:
///   C(n,gamma) int_0^inf rho^{-1-2gamma} int_{S^{n-1}} (f(x) - (f(x+rho w)+f(x-rho w))/2) dw drho.
/// For gamma >= 1 the operator is factored as (-Delta)^{gamma-1} o (-Delta)
/// with the Laplacian taken by fourth-order central differences.
double frac_laplacian_pv(const ScalarField& f, const PointN& x, const ProblemParams& params,
                         const PvOptions& options = {});

/// Eigenvalue Gamma(k+n/2+gamma)/Gamma(k+n/2-gamma) of P_gamma on degree-k
/// spherical harmonics of the round S^n.
double sphere_multiplier(int k, const ProblemParams& params);

/// Inverse stereographic projection F: R^n -> S^n \ {north pole}.
PointN plane_to_sphere(const PointN& x);
/// Stereographic projection from the north pole (0,...,0,1).
PointN sphere_to_plane(const PointN& zeta);
/// |J_F|^{(n-2gamma)/(2n)} = (2/(1+|x|^2))^{(n-2gamma)/2}.
double conformal_weight(const PointN& x, const ProblemParams& params);

}  // namespace qgamma
