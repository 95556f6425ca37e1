#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "qgamma/geometry.hpp"
#include "qgamma/sphere_basis.hpp"

namespace qgamma {

/// Measured normalization of the bubble family.
struct BubbleConstant {
    double Lambda = 0.0;       ///< (-Delta)^gamma W = Lambda W^p, W = (1+|x|^2)^{-(n-2gamma)/2}
    double alpha = 0.0;        ///< Lambda^{1/(p-1)}
    double spread = 0.0;       ///< stddev/mean of the measured ratio
    double closed_form = 0.0;  ///< 2^{2gamma} Gamma(n/2+gamma)/Gamma(n/2-gamma), cross-check only
};

/// Measures Lambda from the radial transform over r in [1e-2, 1e2].
/// Memoized per (n, gamma). Throws AccuracyError if the spread exceeds 1e-5.
BubbleConstant bubble_constant(const ProblemParams& params);

/// z_{mu,xi}(x) = alpha (mu / (mu^2 + |x - xi|^2))^{(n-2gamma)/2}.
struct Bubble {
    double mu = 1.0;
    PointN xi;
    ProblemParams params;
};

Bubble make_bubble(const ProblemParams& params, double mu, const PointN& xi);
/// Standard bubble z_0 = z_{1,0}.
Bubble standard_bubble(const ProblemParams& params);

double bubble_eval(const Bubble& b, const PointN& x);
/// Value at distance r from the center.
double bubble_eval_radial(const Bubble& b, double r);
/// (d/dmu z, d/dxi_1 z, ..., d/dxi_n z) at x.
Eigen::VectorXd bubble_tangents(const Bubble& b, const PointN& x);

/// Lift of z_{mu,xi} to S^n, smooth through the north pole:
///   alpha (mu / (s (mu^2 + |xi|^2 - 1) + 2 - 2 <zeta', xi>))^{(n-2gamma)/2},  s = 1 - zeta_{n+1}.
double lifted_bubble(const Bubble& b, const PointN& zeta);
/// Lifted tangents, same order as bubble_tangents.
Eigen::VectorXd lifted_tangents(const Bubble& b, const PointN& zeta);

SphereField lift_bubble(const Bubble& b, std::shared_ptr<const SphereBasis> basis);
/// Spectral coefficients of the lifted tangents, one column per tangent.
Eigen::MatrixXd lifted_tangent_coeffs(const Bubble& b, const SphereBasis& basis);

/// Linearization phi -> P_gamma phi - p v^{p-1} phi at the lifted bubble v,
/// as a dense symmetric matrix in the sphere basis.
struct LinearizedOperator {
    Bubble bubble;
    std::shared_ptr<const SphereBasis> basis;
    Eigen::MatrixXd matrix;
    double spectral_tail = 0.0;  ///< relative size of the lifted bubble's degree-L coefficients
    bool tail_warning = false;
};

LinearizedOperator linearized_operator(const Bubble& b, int L);

struct KernelReport {
    int dim = 0;
    int expected_dim = 0;
    std::vector<double> angles;        ///< principal angles (rad) to the lifted tangents
    int negatives = 0;
    double threshold = 0.0;            ///< 1e-6 ||matrix||
    std::vector<double> smallest;      ///< smallest |eigenvalues|, ascending
    double gap_ratio = 0.0;            ///< |lambda_{n+2}| / |lambda_{n+1}|
    bool pass = false;
};

/// Counts eigenvalues below 1e-6 ||matrix|| in magnitude and compares the
/// eigenspace with the analytic tangents.
KernelReport kernel_check(const LinearizedOperator& op, double relative_threshold = 1e-6);

}  // namespace qgamma
