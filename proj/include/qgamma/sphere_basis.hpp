#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "qgamma/geometry.hpp"
#include "qgamma/types.hpp"

namespace qgamma {

/// Orthonormal real spectral basis on S^n (n = 1 or 2) truncated at degree L,
/// with a collocation grid that integrates products of band-limited fields
/// exactly and avoids the north pole.
///
/// Coefficient layout (both dimensions): degree l occupies a contiguous block
/// starting at l^2 (n = 2) or 2l - 1 (n = 1); inside a block, order m = 0
/// comes first, then (cos m, sin m) pairs.
///   n = 1: 1/sqrt(2 pi), cos(l phi)/sqrt(pi), sin(l phi)/sqrt(pi)
///   n = 2: real spherical harmonics, zeta = (sin t cos phi, sin t sin phi, cos t).
class SphereBasis {
public:
    SphereBasis(int n, int L, int oversample = 2);

    int dim() const { return n_; }
    int degree() const { return L_; }
    std::size_t size() const { return degrees_.size(); }
    std::size_t node_count() const { return nodes_.size(); }

    /// Collocation nodes on S^n (points of R^{n+1}).
    const std::vector<PointN>& nodes() const { return nodes_; }
    /// Quadrature weights, summing to |S^n|.
    const Eigen::VectorXd& weights() const { return weights_; }
    /// Harmonic degree of every coefficient.
    const std::vector<int>& degrees() const { return degrees_; }

    /// Values at the nodes.
    Eigen::VectorXd synthesize(const Eigen::VectorXd& coeffs) const;
    /// L^2 projection by quadrature.
    Eigen::VectorXd analyze(const Eigen::VectorXd& values) const;
    /// Value at an arbitrary point of S^n.
    double evaluate(const Eigen::VectorXd& coeffs, const PointN& zeta) const;
    /// Eigenvalues of P_gamma per coefficient.
    Eigen::VectorXd multipliers(const ProblemParams& params) const;

private:
    void build_circle(int oversample);
    void build_sphere(int oversample);
    void legendre(double x, double sin_t, std::vector<double>& out) const;
    std::size_t legendre_index(int l, int m) const { return static_cast<std::size_t>(m * (2 * L_ + 3 - m) / 2 + (l - m)); }

    int n_;
    int L_;
    std::vector<PointN> nodes_;
    Eigen::VectorXd weights_;
    std::vector<int> degrees_;

    // n = 1: dense synthesis matrix (nodes x coeffs).
    Eigen::MatrixXd circle_synthesis_;

    // n = 2: rings of constant polar angle.
    int rings_ = 0;
    int ring_points_ = 0;
    Eigen::VectorXd ring_weights_;
    std::vector<double> ring_legendre_;  // rings x legendre table
    Eigen::MatrixXd cos_table_;          // ring_points x (L+1)
    Eigen::MatrixXd sin_table_;
};

/// Spectral field on S^n.
struct SphereField {
    std::shared_ptr<const SphereBasis> basis;
    Eigen::VectorXd coeffs;

    Eigen::VectorXd values() const { return basis->synthesize(coeffs); }
    double operator()(const PointN& zeta) const { return basis->evaluate(coeffs, zeta); }
    double l2_norm() const { return coeffs.norm(); }
    double min_value() const { return values().minCoeff(); }
};

/// v = u o F^{-1} / w on S^n, sampled at the nodes and projected.
SphereField lift_to_sphere(const ScalarField& u, const ProblemParams& params,
                           std::shared_ptr<const SphereBasis> basis);
/// u(x) = w(x) v(F(x)).
double pull_to_plane(const SphereField& v, const ProblemParams& params, const PointN& x);

}  // namespace qgamma
