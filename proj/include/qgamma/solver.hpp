#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qgamma/bubbles.hpp"
#include "qgamma/curvature.hpp"
#include "qgamma/reduced.hpp"
#include "qgamma/sphere_basis.hpp"

namespace qgamma {

/// Discretized f_eps on S^n in an orthonormal spectral basis:
///   f(v) = 1/2 sum_k lambda_k c_k^2 - 1/(p+1) sum_j w_j (1 + eps K(F^{-1} zeta_j)) v_+(zeta_j)^{p+1}.
/// The L^2 gradient in coefficient space is the spectral residual
///   P_gamma v - analyze((1 + eps K o F^{-1}) v_+^p).
class SphereProblem {
public:
    SphereProblem(const CurvatureField& K, const ProblemParams& params, double epsilon,
                  std::shared_ptr<const SphereBasis> basis);

    const SphereBasis& basis() const { return *basis_; }
    std::shared_ptr<const SphereBasis> basis_ptr() const { return basis_; }
    const ProblemParams& params() const { return params_; }
    double epsilon() const { return epsilon_; }
    const Eigen::VectorXd& multipliers() const { return lambda_; }
    /// 1 + eps K o F^{-1} at the nodes.
    const Eigen::VectorXd& factor() const { return factor_; }

    double energy(const Eigen::VectorXd& c) const;
    Eigen::VectorXd residual(const Eigen::VectorXd& c) const;
    /// Action of the Jacobian of the residual at c on d.
    Eigen::VectorXd jacobian_apply(const Eigen::VectorXd& c, const Eigen::VectorXd& d) const;
    /// Dense symmetric Jacobian (n = 1 sizes).
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& c) const;

private:
    std::shared_ptr<const SphereBasis> basis_;
    ProblemParams params_;
    double epsilon_;
    Eigen::VectorXd lambda_;
    Eigen::VectorXd factor_;
};

/// Default truncation degree: 64 for n = 1, 48 for n = 2.
int default_degree(int n);
std::shared_ptr<const SphereBasis> make_basis(int n, int L = 0);

double energy(const SphereField& u, double epsilon, const CurvatureField& K, const ProblemParams& params);
/// Gradient of energy() in the spectral basis.
SphereField energy_gradient(const SphereField& u, double epsilon, const CurvatureField& K,
                            const ProblemParams& params);

struct SolverOptions {
    double tol = 0.0;            ///< residual L^2 target; 0 means 1e-9 (n = 1), 1e-7 (n = 2)
    int max_iterations = 30;
    double singular_cutoff = 1e-10;  ///< n = 1: relative singular-value cutoff of the Newton solve
    int gmres_restart = 80;
    int gmres_max_iterations = 800;
    bool fine_check = true;      ///< recompute the residual with twice the degree
};

struct SolutionRecord {
    double epsilon = 0.0;
    SphereField field;
    double residual_L2 = 0.0;
    double residual_fine = std::numeric_limits<double>::quiet_NaN();
    int newton_iters = 0;
    std::vector<double> residual_history;
    Bubble nearest_bubble;
    double distance_to_Z = 0.0;     ///< D^gamma distance to the fitted bubble
    double positivity_margin = 0.0;  ///< min over the nodes
    double kernel_gap = std::numeric_limits<double>::quiet_NaN();  ///< (n+2)-th smallest |eigenvalue|
    std::vector<double> near_kernel;  ///< n+1 smallest |eigenvalues| (n = 1)
    double gradient_check = 0.0;     ///< relative energy/gradient mismatch at the seed
    double decay_slope = std::numeric_limits<double>::quiet_NaN();  ///< log-log slope of u at infinity
};

/// Newton on the spectral residual from the seed, with backtracking on the
/// residual norm. n = 1: dense solve with a truncated pseudo-inverse (the
/// n + 1 near-kernel directions are deflated when they are numerically
/// singular); n = 2: GMRES with the multiplier diagonal as preconditioner.
/// Throws ConvergenceError (with the residual trace) or PositivityError.
SolutionRecord solve_newton(const SphereField& seed, double epsilon, const CurvatureField& K,
                            const ProblemParams& params, const SolverOptions& opt = {},
                            const std::optional<Bubble>& seed_bubble = std::nullopt);

struct BubbleFit {
    Bubble bubble;
    double distance = 0.0;
    int iterations = 0;
};

/// Gauss-Newton minimization of the D^gamma distance over (mu, xi).
BubbleFit fit_nearest_bubble(const SphereField& v, const ProblemParams& params, const Bubble& start);

/// D^gamma norm on the sphere side, sqrt(sum lambda_k c_k^2).
double dgamma_norm(const Eigen::VectorXd& coeffs, const SphereBasis& basis, const ProblemParams& params);

struct SweepRow {
    double epsilon = 0.0;
    std::optional<SolutionRecord> record;
    std::string error;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    double slope = std::numeric_limits<double>::quiet_NaN();
    double constant = std::numeric_limits<double>::quiet_NaN();  ///< C in distance ~ C eps^slope
    int fitted = 0;
    bool monotone = false;  ///< distances nondecreasing in eps (informational)
};

/// Warm-started solves over ascending eps, then a log-log fit of
/// distance_to_Z against eps over the converged rows with eps > 0.
SweepResult continuation_sweep(const CurvatureField& K, const ProblemParams& params, const std::vector<double>& eps_list,
                               const Bubble& seed, int L = 0, const SolverOptions& opt = {});

struct ConstantCheck {
    double max_deviation = 0.0;  ///< max |v - 1| over the nodes
    int iterations = 0;
    double Lambda_implied = 0.0;  ///< lambda_0 2^{2 gamma}
    double Lambda_bubble = 0.0;
};

/// Solves P_gamma v = lambda_0 v^p from v = 0.9; v must come back as 1.
ConstantCheck sphere_constant_check(const ProblemParams& params, int L = 0);

struct RieszCheck {
    double residual = 0.0;  ///< sup over probes of |u(x) - c int (1+eps K) u_+^p |x-y|^{2gamma-n} dy|
    double c_riesz = 0.0;
    bool available = true;
    std::string note;
};

/// Riesz representation check at plane probes |x| in probe_radii (along a
/// few fixed directions), computed on the sphere with geodesic polar
/// coordinates around each probe.
RieszCheck riesz_residual(const SphereField& v, double epsilon, const CurvatureField& K, const ProblemParams& params,
                          const std::vector<double>& probe_radii = {0.0, 1.0, 5.0});

/// Zeros of Gamma' with mu > 0 in the box, as bubbles, residual-sorted.
/// Seeds are points (mu, xi); without them the box is searched exhaustively.
std::vector<Bubble> reduced_zeros(const ReducedFunctional& rf, const Box& box, const std::vector<PointN>& seeds = {});

nlohmann::ordered_json to_json(const SolutionRecord& r);
/// node coordinates and values, one node per line.
std::string field_csv(const SphereField& v);

}  // namespace qgamma
