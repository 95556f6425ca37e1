#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "qgamma/curvature.hpp"
#include "qgamma/geometry.hpp"

namespace qgamma {

/// Quadrature for integrals against z_0^{p+1}: radius r = tan t with a
/// tanh-sinh rule on t in (0, pi/2) (no truncation radius), times a product
/// angular rule (n = 1: {+1, -1}; n = 2: trapezoid; n = 3: Gauss-Legendre in
/// cos(theta) x trapezoid in phi).
struct ReducedQuadrature {
    double tolerance = 1e-13;  ///< relative, between successive tanh-sinh levels
    int max_level = 10;
    int circle_nodes = 64;
    int polar_nodes = 32;
    int azimuth_nodes = 64;
    bool strict = true;  ///< false: return the finest level instead of throwing
};

/// Gamma(mu, xi) = (1/(p+1)) int K(mu y + xi) z_0^{p+1}(y) dy, extended evenly to mu <= 0.
class ReducedFunctional {
public:
    ReducedFunctional(CurvatureField K, ProblemParams params, ReducedQuadrature quad = {});

    const CurvatureField& curvature() const { return K_; }
    const ProblemParams& params() const { return params_; }
    const ReducedQuadrature& quadrature() const { return quad_; }
    double c0() const { return c0_; }

    double eval(double mu, const PointN& xi) const;
    /// (D_mu Gamma, D_xi Gamma) by differentiating under the integral.
    Eigen::VectorXd grad(double mu, const PointN& xi) const;
    /// Quadrature value of <K'(xi), int y z_0^{p+1}>/(p+1); zero up to rounding.
    double mu_derivative_at_zero(const PointN& xi) const;

    /// Accumulates weight * g(r omega) into acc.
    using Integrand = std::function<void(double r, const PointN& omega, double weight, Eigen::VectorXd& acc)>;
    /// (1/(p+1)) int g(y) z_0^{p+1}(y) dy for a vector-valued g. Throws
    /// AccuracyError if the tanh-sinh levels do not settle (strict rules only); the relative test
    /// uses max(|result|, abs_scale) as the scale.
    Eigen::VectorXd integrate(const Integrand& g, int components, double* error = nullptr,
                              double abs_scale = 0.0) const;

private:
    CurvatureField K_;
    ProblemParams params_;
    ReducedQuadrature quad_;
    std::vector<PointN> directions_;
    std::vector<double> direction_weights_;
    double weight_scale_ = 0.0;  // alpha^{p+1}/(p+1)
    double c0_ = 0.0;
};

/// (1/(p+1)) int z_0^{p+1}, by quadrature.
double c0(const ProblemParams& params, const ReducedQuadrature& quad = {});
/// Closed form alpha^{p+1} |S^{n-1}| B(n/2, n/2) / (2(p+1)).
double c0_closed_form(const ProblemParams& params);
/// (1/(n(p+1))) int |y|^2 z_0^{p+1}. Throws DomainError for n <= 2.
double c1(const ProblemParams& params, const ReducedQuadrature& quad = {});

struct HessianMu0 {
    double value = 0.0;              ///< c1 * Laplacian K(xi)
    double second_difference = 0.0;  ///< Richardson-extrapolated 2(Gamma(h) - Gamma(0))/h^2
    double extrapolation_error = 0.0;
};

/// D^2_mu Gamma(0, xi) = c1 Delta K(xi) and an independent second-difference estimate.
HessianMu0 gamma_hessian_mu0(const PointN& xi, const ReducedFunctional& rf);
/// Central-difference estimate of D^2_{mu, xi_i} Gamma(0, xi).
double gamma_mixed_mu0(const PointN& xi, int i, const ReducedFunctional& rf);

/// Positively homogeneous model Q of degree beta with A = (1/(p+1)) int Q z_0^{p+1}.
struct HomogeneousModel {
    double beta = 2.0;
    std::function<double(const PointN&)> Q;
    double A = 0.0;
};

/// Model sum_j a_j |y_j|^beta.
HomogeneousModel power_model(double beta, std::vector<double> coefficients);
/// Model y^T H y / 2 from a Hessian.
HomogeneousModel quadratic_model(const MatrixN& hessian);

/// A = (1/(p+1)) int Q z_0^{p+1}; requires 1 < beta < n (else DomainError).
/// tol is the angular quadrature tolerance; loosen it for sampled models.
double a_xi(const HomogeneousModel& model, const ProblemParams& params, double tol = 1e-12);

struct LimitCheck {
    std::vector<double> mus;
    std::vector<double> ratios;       ///< (Gamma(mu) - Gamma(0)) / mu^beta
    std::vector<double> exponents;    ///< correction exponents eliminated
    std::vector<bool> logarithmic;    ///< exponent j carries a log mu factor
    double extrapolated = 0.0;
    double extrapolation_error = 0.0;
    double A = 0.0;
    double relative_error = 0.0;      ///< |extrapolated - A| / |A|
};

/// Ratio sequence on mu in {0.2, 0.1, 0.05, 0.025}, Richardson extrapolated.
LimitCheck a_xi_limit_check(const ReducedFunctional& rf, const PointN& xi, const HomogeneousModel& model,
                            std::vector<double> correction_exponents = {});

struct LandscapeRow {
    double mu = 0.0;
    PointN xi;
    double gamma = 0.0;
    double grad_norm = 0.0;
};

/// Deterministic grid scan of (Gamma, |Gamma'|) over a box in (mu, xi) space.
std::vector<LandscapeRow> landscape_scan(const ReducedFunctional& rf, const Box& box, int resolution);
std::string landscape_csv(const std::vector<LandscapeRow>& rows, int n);

/// Richardson elimination of the given correction exponents from values at
/// steps h_0 > h_1 > ... (successive ratio r). Returns (estimate, error).
std::pair<double, double> richardson(const std::vector<double>& steps, const std::vector<double>& values,
                                     const std::vector<double>& exponents, const std::vector<bool>& logarithmic = {});

}  // namespace qgamma
