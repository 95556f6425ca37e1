#include "qgamma/solver.hpp"

#include <unsupported/Eigen/IterativeSolvers>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <iomanip>
#include <sstream>

#include "qgamma/conditions.hpp"
#include "qgamma/errors.hpp"
#include "qgamma/special.hpp"

namespace qgamma {
class JacobianOperator;
}

namespace Eigen::internal {
template <>
struct traits<qgamma::JacobianOperator> : public traits<Eigen::SparseMatrix<double>> {};
}  // namespace Eigen::internal

namespace qgamma {

// Matrix-free Jacobian for the iterative solver.
class JacobianOperator : public Eigen::EigenBase<JacobianOperator> {
public:
    using Scalar = double;
    using RealScalar = double;
    using StorageIndex = int;
    enum { ColsAtCompileTime = Eigen::Dynamic, MaxColsAtCompileTime = Eigen::Dynamic, IsRowMajor = false };

    JacobianOperator(const SphereProblem& problem, const Eigen::VectorXd& at) : problem_(problem), at_(at) {}

    Eigen::Index rows() const { return at_.size(); }
    Eigen::Index cols() const { return at_.size(); }
    Eigen::VectorXd apply(const Eigen::VectorXd& d) const { return problem_.jacobian_apply(at_, d); }
    const Eigen::VectorXd& multipliers() const { return problem_.multipliers(); }

    template <typename Rhs>
    Eigen::Product<JacobianOperator, Rhs, Eigen::AliasFreeProduct> operator*(const Eigen::MatrixBase<Rhs>& x) const {
        return Eigen::Product<JacobianOperator, Rhs, Eigen::AliasFreeProduct>(*this, x.derived());
    }

private:
    const SphereProblem& problem_;
    Eigen::VectorXd at_;
};

// Inverse of the P_gamma multipliers.
class MultiplierPreconditioner {
public:
    using StorageIndex = int;
    enum { ColsAtCompileTime = Eigen::Dynamic, MaxColsAtCompileTime = Eigen::Dynamic };

    MultiplierPreconditioner() = default;
    template <typename M>
    explicit MultiplierPreconditioner(const M& m) {
        compute(m);
    }
    template <typename M>
    MultiplierPreconditioner& analyzePattern(const M&) {
        return *this;
    }
    template <typename M>
    MultiplierPreconditioner& factorize(const M& m) {
        return compute(m);
    }
    template <typename M>
    MultiplierPreconditioner& compute(const M& m) {
        inverse_ = m.multipliers().cwiseInverse();
        return *this;
    }
    template <typename Rhs>
    Eigen::VectorXd solve(const Eigen::MatrixBase<Rhs>& b) const {
        return inverse_.cwiseProduct(b.derived());
    }
    Eigen::ComputationInfo info() { return Eigen::Success; }

private:
    Eigen::VectorXd inverse_;
};

}  // namespace qgamma

namespace Eigen::internal {
template <typename Rhs>
struct generic_product_impl<qgamma::JacobianOperator, Rhs, SparseShape, DenseShape, GemvProduct>
    : generic_product_impl_base<qgamma::JacobianOperator, Rhs,
                                generic_product_impl<qgamma::JacobianOperator, Rhs>> {
    using Scalar = typename Product<qgamma::JacobianOperator, Rhs>::Scalar;
    template <typename Dest>
    static void scaleAndAddTo(Dest& dst, const qgamma::JacobianOperator& lhs, const Rhs& rhs, const Scalar& alpha) {
        dst.noalias() += alpha * lhs.apply(rhs);
    }
};
}  // namespace Eigen::internal

namespace qgamma {

using std::numbers::pi;

namespace {

Eigen::VectorXd sphere_factor(const CurvatureField& K, double epsilon, const SphereBasis& basis) {
    const auto& nodes = basis.nodes();
    Eigen::VectorXd f = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(nodes.size()));
    if (epsilon == 0.0) return f;
    for (std::size_t j = 0; j < nodes.size(); ++j) {
        f[static_cast<Eigen::Index>(j)] += epsilon * K.value(sphere_to_plane(nodes[j]));
    }
    return f;
}

Eigen::VectorXd positive_power(const Eigen::VectorXd& v, double e) {
    return v.unaryExpr([e](double x) { return x > 0.0 ? std::pow(x, e) : 0.0; });
}

struct NewtonRun {
    Eigen::VectorXd c;
    int iterations = 0;
    std::vector<double> history;
    std::optional<Eigen::MatrixXd> last_jacobian;
};

std::string trace_string(const std::vector<double>& history) {
    std::ostringstream s;
    s << "residual trace:";
    for (double r : history) s << " " << std::setprecision(3) << r;
    return s.str();
}

Eigen::VectorXd newton_step(const SphereProblem& prob, const Eigen::VectorXd& c, const Eigen::VectorXd& R,
                            const SolverOptions& opt, std::optional<Eigen::MatrixXd>* dense) {
    if (prob.params().n == 1) {
        Eigen::MatrixXd J = prob.jacobian(c);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Eigen::VectorXd& s = svd.singularValues();
        const double cut = opt.singular_cutoff * s[0];
        Eigen::VectorXd ut = svd.matrixU().transpose() * R;
        for (Eigen::Index i = 0; i < s.size(); ++i) ut[i] = s[i] > cut ? ut[i] / s[i] : 0.0;
        if (dense) *dense = std::move(J);
        return -(svd.matrixV() * ut);
    }
    JacobianOperator op(prob, c);
    Eigen::GMRES<JacobianOperator, MultiplierPreconditioner> gmres;
    gmres.set_restart(opt.gmres_restart);
    gmres.setMaxIterations(opt.gmres_max_iterations);
    gmres.setTolerance(1e-10);
    gmres.compute(op);
    Eigen::VectorXd d = gmres.solve(-R);
    return d;
}

NewtonRun newton(const SphereProblem& prob, const Eigen::VectorXd& seed, double tol, const SolverOptions& opt,
                 bool keep_jacobian) {
    NewtonRun run;
    run.c = seed;
    Eigen::VectorXd R = prob.residual(run.c);
    double norm = R.norm();
    run.history.push_back(norm);
    while (norm > tol) {
        if (run.iterations >= opt.max_iterations) {
            throw ConvergenceError("Newton did not reach the residual target " + std::to_string(tol) + "; " +
                                   trace_string(run.history));
        }
        const Eigen::VectorXd d = newton_step(prob, run.c, R, opt, nullptr);
        double t = 1.0;
        bool accepted = false;
        while (t >= 1.0 / 1024.0) {
            const Eigen::VectorXd trial = run.c + t * d;
            const Eigen::VectorXd Rt = prob.residual(trial);
            const double nt = Rt.norm();
            if (std::isfinite(nt) && nt < (1.0 - 1e-4 * t) * norm) {
                run.c = trial;
                R = Rt;
                norm = nt;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        ++run.iterations;
        run.history.push_back(norm);
        if (!accepted) {
            throw ConvergenceError("Newton stagnated: no decrease along the Newton direction; " +
                                   trace_string(run.history));
        }
    }
    if (keep_jacobian && prob.params().n == 1) run.last_jacobian = prob.jacobian(run.c);
    return run;
}

double default_tol(int n) { return n == 1 ? 1e-9 : 1e-7; }

}  // namespace

SphereProblem::SphereProblem(const CurvatureField& K, const ProblemParams& params, double epsilon,
                             std::shared_ptr<const SphereBasis> basis)
    : basis_(std::move(basis)), params_(params), epsilon_(epsilon) {
    if (params_.n != 1 && params_.n != 2) throw DomainError("sphere solver: n must be 1 or 2");
    if (basis_->dim() != params_.n) throw ShapeError("sphere solver: basis dimension does not match n");
    if (epsilon != 0.0 && K.n != params_.n) throw ShapeError("sphere solver: K dimension does not match n");
    lambda_ = basis_->multipliers(params_);
    factor_ = sphere_factor(K, epsilon, *basis_);
}

double SphereProblem::energy(const Eigen::VectorXd& c) const {
    const Eigen::VectorXd v = basis_->synthesize(c);
    const double quadratic = 0.5 * c.dot(lambda_.cwiseProduct(c));
    const double p1 = params_.p + 1.0;
    const double nonlinear = basis_->weights().dot(factor_.cwiseProduct(positive_power(v, p1))) / p1;
    return quadratic - nonlinear;
}

Eigen::VectorXd SphereProblem::residual(const Eigen::VectorXd& c) const {
    const Eigen::VectorXd v = basis_->synthesize(c);
    return lambda_.cwiseProduct(c) - basis_->analyze(factor_.cwiseProduct(positive_power(v, params_.p)));
}

Eigen::VectorXd SphereProblem::jacobian_apply(const Eigen::VectorXd& c, const Eigen::VectorXd& d) const {
    const Eigen::VectorXd v = basis_->synthesize(c);
    const Eigen::VectorXd g = params_.p * factor_.cwiseProduct(positive_power(v, params_.p - 1.0));
    return lambda_.cwiseProduct(d) - basis_->analyze(g.cwiseProduct(basis_->synthesize(d)));
}

Eigen::MatrixXd SphereProblem::jacobian(const Eigen::VectorXd& c) const {
    const Eigen::Index m = c.size();
    Eigen::MatrixXd S(static_cast<Eigen::Index>(basis_->node_count()), m);
    for (Eigen::Index k = 0; k < m; ++k) S.col(k) = basis_->synthesize(Eigen::VectorXd::Unit(m, k));
    const Eigen::VectorXd v = S * c;
    const Eigen::VectorXd g =
        params_.p * basis_->weights().cwiseProduct(factor_.cwiseProduct(positive_power(v, params_.p - 1.0)));
    Eigen::MatrixXd J = -(S.transpose() * g.asDiagonal() * S);
    J.diagonal() += lambda_;
    return 0.5 * (J + J.transpose());
}

int default_degree(int n) { return n == 1 ? 64 : 48; }

std::shared_ptr<const SphereBasis> make_basis(int n, int L) {
    return std::make_shared<const SphereBasis>(n, L > 0 ? L : default_degree(n));
}

double energy(const SphereField& u, double epsilon, const CurvatureField& K, const ProblemParams& params) {
    return SphereProblem(K, params, epsilon, u.basis).energy(u.coeffs);
}

SphereField energy_gradient(const SphereField& u, double epsilon, const CurvatureField& K,
                            const ProblemParams& params) {
    SphereField g;
    g.basis = u.basis;
    g.coeffs = SphereProblem(K, params, epsilon, u.basis).residual(u.coeffs);
    return g;
}

double dgamma_norm(const Eigen::VectorXd& coeffs, const SphereBasis& basis, const ProblemParams& params) {
    return std::sqrt(coeffs.dot(basis.multipliers(params).cwiseProduct(coeffs)));
}

BubbleFit fit_nearest_bubble(const SphereField& v, const ProblemParams& params, const Bubble& start) {
    const int n = params.n;
    const Eigen::VectorXd root = v.basis->multipliers(params).cwiseSqrt();
    Bubble b = start;
    auto residual_of = [&](const Bubble& q) {
        return Eigen::VectorXd(root.cwiseProduct(v.coeffs - lift_bubble(q, v.basis).coeffs));
    };
    Eigen::VectorXd r = residual_of(b);
    double cost = r.squaredNorm();
    double damping = 1e-6;
    BubbleFit fit;
    for (int it = 0; it < 100; ++it) {
        fit.iterations = it + 1;
        // d(residual)/d(theta) = -root * tangents.
        const Eigen::MatrixXd J = root.asDiagonal() * lifted_tangent_coeffs(b, *v.basis);
        const Eigen::MatrixXd N = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;
        bool improved = false;
        Eigen::VectorXd step;
        for (int tries = 0; tries < 30 && !improved; ++tries) {
            Eigen::MatrixXd A = N;
            A.diagonal() += damping * N.diagonal().cwiseMax(1e-300);
            step = A.ldlt().solve(g);
            Bubble trial = b;
            trial.mu = b.mu + step[0];
            if (!(trial.mu > 0.0)) {
                damping *= 4.0;
                continue;
            }
            for (int i = 0; i < n; ++i) trial.xi[i] += step[i + 1];
            const Eigen::VectorXd rt = residual_of(trial);
            const double ct = rt.squaredNorm();
            if (ct <= cost) {
                b = trial;
                r = rt;
                const double drop = cost - ct;
                cost = ct;
                damping = std::max(damping / 3.0, 1e-12);
                improved = true;
                if (drop <= 1e-15 * cost && step.norm() < 1e-6) it = 1000;
            } else {
                damping *= 4.0;
            }
        }
        if (!improved || step.norm() < 1e-13 * (1.0 + b.mu + b.xi.norm())) break;
    }
    fit.bubble = b;
    fit.distance = std::sqrt(cost);
    return fit;
}

SolutionRecord solve_newton(const SphereField& seed, double epsilon, const CurvatureField& K,
                            const ProblemParams& params, const SolverOptions& opt,
                            const std::optional<Bubble>& seed_bubble) {
    const int n = params.n;
    const SphereProblem prob(K, params, epsilon, seed.basis);
    const double tol = opt.tol > 0.0 ? opt.tol : default_tol(n);

    SolutionRecord rec;
    rec.epsilon = epsilon;
    {
        // Energy/gradient spot check along a fixed band-limited direction.
        std::mt19937_64 rng(12345);
        std::normal_distribution<double> g;
        Eigen::VectorXd d(seed.coeffs.size());
        const auto& deg = seed.basis->degrees();
        for (Eigen::Index k = 0; k < d.size(); ++k) d[k] = g(rng) / (1.0 + deg[static_cast<std::size_t>(k)]);
        d /= d.norm();
        const double h = 1e-5;
        const double fd = (prob.energy(seed.coeffs + h * d) - prob.energy(seed.coeffs - h * d)) / (2.0 * h);
        const double an = prob.residual(seed.coeffs).dot(d);
        const double scale = prob.multipliers().cwiseProduct(seed.coeffs).norm();
        rec.gradient_check = std::abs(fd - an) / std::max(scale, 1e-300);
    }

    NewtonRun run = newton(prob, seed.coeffs, tol, opt, true);
    rec.field.basis = seed.basis;
    rec.field.coeffs = run.c;
    rec.residual_L2 = run.history.back();
    rec.residual_history = run.history;
    rec.newton_iters = run.iterations;

    const Eigen::VectorXd values = rec.field.values();
    rec.positivity_margin = values.minCoeff();
    if (opt.fine_check) {
        const auto fine = make_basis(n, 2 * seed.basis->degree());
        Eigen::VectorXd padded = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fine->size()));
        padded.head(run.c.size()) = run.c;
        const SphereProblem fine_prob(K, params, epsilon, fine);
        rec.residual_fine = fine_prob.residual(padded).norm();
        rec.positivity_margin = std::min(rec.positivity_margin, fine->synthesize(padded).minCoeff());
    }
    if (!(rec.positivity_margin > 0.0)) {
        throw PositivityError("converged field is not positive: min = " + std::to_string(rec.positivity_margin),
                              rec.positivity_margin);
    }

    const BubbleFit fit = fit_nearest_bubble(rec.field, params, seed_bubble ? *seed_bubble : standard_bubble(params));
    rec.nearest_bubble = fit.bubble;
    rec.distance_to_Z = fit.distance;

    if (run.last_jacobian) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(*run.last_jacobian, Eigen::EigenvaluesOnly);
        std::vector<double> mags;
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) mags.push_back(std::abs(es.eigenvalues()[i]));
        std::sort(mags.begin(), mags.end());
        rec.near_kernel.assign(mags.begin(), mags.begin() + n + 1);
        rec.kernel_gap = mags[static_cast<std::size_t>(n + 1)];
    }

    // u(x) ~ |x|^{-(n - 2 gamma)} at infinity.
    std::vector<double> lx, ly;
    for (double r : log_nodes(10.0, 1000.0, 9)) {
        PointN x = PointN::Zero(n);
        x[0] = r;
        const double u = pull_to_plane(rec.field, params, x);
        if (u > 0.0) {
            lx.push_back(std::log(r));
            ly.push_back(std::log(u));
        }
    }
    if (lx.size() >= 2) {
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            mx += lx[i] / lx.size();
            my += ly[i] / ly.size();
        }
        double sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            sxx += (lx[i] - mx) * (lx[i] - mx);
            sxy += (lx[i] - mx) * (ly[i] - my);
        }
        rec.decay_slope = sxy / sxx;
    }
    return rec;
}

SweepResult continuation_sweep(const CurvatureField& K, const ProblemParams& params, const std::vector<double>& eps_list,
                               const Bubble& seed, int L, const SolverOptions& opt) {
    if (!std::is_sorted(eps_list.begin(), eps_list.end())) throw ValidationError("sweep: eps list must be ascending");
    const auto basis = make_basis(params.n, L);
    SweepResult out;
    SphereField current = lift_bubble(seed, basis);
    Bubble bubble = seed;
    for (double eps : eps_list) {
        SweepRow row;
        row.epsilon = eps;
        try {
            row.record = solve_newton(current, eps, K, params, opt, bubble);
            current = row.record->field;
            bubble = row.record->nearest_bubble;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        out.rows.push_back(std::move(row));
    }
    std::vector<double> lx, ly;
    double prev = -1.0;
    out.monotone = true;
    for (const auto& row : out.rows) {
        if (!row.record) continue;
        const double d = row.record->distance_to_Z;
        if (d < prev) out.monotone = false;
        prev = d;
        if (row.epsilon > 0.0 && d > 0.0) {
            lx.push_back(std::log(row.epsilon));
            ly.push_back(std::log(d));
        }
    }
    out.fitted = static_cast<int>(lx.size());
    if (lx.size() >= 2) {
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            mx += lx[i] / lx.size();
            my += ly[i] / ly.size();
        }
        double sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            sxx += (lx[i] - mx) * (lx[i] - mx);
            sxy += (lx[i] - mx) * (ly[i] - my);
        }
        out.slope = sxy / sxx;
        out.constant = std::exp(my - out.slope * mx);
    }
    return out;
}

ConstantCheck sphere_constant_check(const ProblemParams& params, int L) {
    const auto basis = make_basis(params.n, L > 0 ? L : 16);
    CurvatureField flat = builtin_curvature("constant", params.n);
    // 1 + eps K = lambda_0 with K = 1.
    const double lambda0 = sphere_multiplier(0, params);
    const SphereProblem prob(flat, params, lambda0 - 1.0, basis);
    const Eigen::VectorXd seed = basis->analyze(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(basis->node_count()), 0.9));
    SolverOptions opt;
    const NewtonRun run = newton(prob, seed, 1e-11, opt, false);
    ConstantCheck out;
    out.iterations = run.iterations;
    out.max_deviation = (basis->synthesize(run.c).array() - 1.0).abs().maxCoeff();
    out.Lambda_implied = lambda0 * std::pow(2.0, 2.0 * params.gamma);
    out.Lambda_bubble = bubble_constant(params).Lambda;
    if (out.max_deviation > 1e-8) {
        throw AccuracyError("sphere constant check: v deviates from 1 by " + std::to_string(out.max_deviation),
                            out.max_deviation, 1e-8);
    }
    return out;
}

namespace {

// int_{S^n} f(eta) |zeta - eta|^{2 gamma - n} dV in geodesic polar
// coordinates around zeta, radial variable t = rho^{2 gamma}.
double riesz_potential(const std::function<double(const PointN&)>& f, const PointN& zeta, const ProblemParams& params) {
    const int n = params.n;
    const double g2 = 2.0 * params.gamma;
    // Columns 1..n of Q span the tangent space at zeta.
    const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(Eigen::MatrixXd(Eigen::VectorXd(zeta))).householderQ();
    std::vector<PointN> dirs;
    std::vector<double> weights;
    special::sphere_rule(n, 64, 16, 32, dirs, weights);
    auto integrand = [&](double t) {
        if (t <= 0.0) t = 1e-300;
        const double rho = std::pow(t, 1.0 / g2);
        const double chord = 2.0 * std::sin(0.5 * rho);
        double ang = 0.0;
        for (std::size_t k = 0; k < dirs.size(); ++k) {
            Eigen::VectorXd tangent = Eigen::VectorXd::Zero(n + 1);
            for (int i = 0; i < n; ++i) tangent += dirs[k][i] * Q.col(i + 1);
            const Eigen::VectorXd eta = std::cos(rho) * Eigen::VectorXd(zeta) + std::sin(rho) * tangent;
            ang += weights[k] * f(PointN(eta));
        }
        const double jac = n == 1 ? 1.0 : std::sin(rho) / rho;
        return ang * jac * std::pow(chord / rho, g2 - n) / g2;
    };
    return special::integrate_gk(integrand, 0.0, std::pow(pi, g2), 1e-11);
}

}  // namespace

RieszCheck riesz_residual(const SphereField& v, double epsilon, const CurvatureField& K, const ProblemParams& params,
                          const std::vector<double>& probe_radii) {
    const int n = params.n;
    RieszCheck out;
    // Calibration on the lifted standard bubble, a constant on the sphere.
    static std::mutex mutex;
    static std::map<std::pair<int, double>, double> memo;
    {
        std::lock_guard<std::mutex> lock(mutex);
        auto it = memo.find({n, params.gamma});
        if (it == memo.end()) {
            PointN pole = PointN::Zero(n + 1);
            pole[n] = -1.0;
            const double v0 = lifted_bubble(standard_bubble(params), pole);
            const double integral = riesz_potential([](const PointN&) { return 1.0; }, pole, params);
            it = memo.emplace(std::make_pair(n, params.gamma), v0 / (std::pow(v0, params.p) * integral)).first;
        }
        out.c_riesz = it->second;
    }
    if (v.coeffs.cwiseAbs().maxCoeff() == 0.0) return out;
    const Eigen::VectorXd& c = v.coeffs;
    const SphereBasis& basis = *v.basis;
    auto source = [&](const PointN& eta) {
        const double value = basis.evaluate(c, eta);
        if (value <= 0.0) return 0.0;
        double factor = 1.0;
        if (epsilon != 0.0) {
            factor += epsilon * (eta[n] > 1.0 - 1e-14 ? K.tail_value : K.value(sphere_to_plane(eta)));
        }
        return factor * std::pow(value, params.p);
    };
    std::vector<PointN> probes;
    for (double r : probe_radii) {
        PointN x = PointN::Zero(n);
        if (r == 0.0) {
            probes.push_back(x);
            continue;
        }
        x[0] = r;
        probes.push_back(x);
        x[0] = -r;
        probes.push_back(x);
        if (n == 2) {
            x << r / std::sqrt(2.0), r / std::sqrt(2.0);
            probes.push_back(x);
        }
    }
    try {
        for (const auto& x : probes) {
            const PointN zeta = plane_to_sphere(x);
            const double u = pull_to_plane(v, params, x);
            const double rep = conformal_weight(x, params) * out.c_riesz * riesz_potential(source, zeta, params);
            out.residual = std::max(out.residual, std::abs(u - rep));
        }
    } catch (const std::exception& e) {
        out.available = false;
        out.note = e.what();
    }
    return out;
}

std::vector<Bubble> reduced_zeros(const ReducedFunctional& rf, const Box& box, const std::vector<PointN>& seeds) {
    const int n = rf.params().n;
    if (!(box.lower[0] > 0.0)) throw ValidationError("reduced_zeros: the box must lie in mu > 0");
    CritOptions opt;
    opt.residual_tol = 1e-10;
    opt.degree = ApplicabilityOptions{}.degree;
    const auto found = crit_points(reduced_gradient_map(rf), box, seeds, opt);
    std::vector<CritPoint> points = found.points;
    std::stable_sort(points.begin(), points.end(),
                     [](const CritPoint& a, const CritPoint& b) { return a.residual < b.residual; });
    std::vector<Bubble> out;
    for (const auto& cp : points) out.push_back(make_bubble(rf.params(), cp.x[0], PointN(cp.x.tail(n))));
    return out;
}

nlohmann::ordered_json to_json(const SolutionRecord& r) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); };
    nlohmann::ordered_json j;
    j["epsilon"] = r.epsilon;
    j["L"] = r.field.basis ? r.field.basis->degree() : 0;
    j["residual_L2"] = num(r.residual_L2);
    j["residual_fine"] = num(r.residual_fine);
    j["newton_iters"] = r.newton_iters;
    j["residual_history"] = r.residual_history;
    nlohmann::ordered_json b;
    b["mu"] = r.nearest_bubble.mu;
    nlohmann::ordered_json xi = nlohmann::ordered_json::array();
    for (int i = 0; i < r.nearest_bubble.xi.size(); ++i) xi.push_back(r.nearest_bubble.xi[i]);
    b["xi"] = xi;
    j["nearest_bubble"] = b;
    j["distance_to_Z"] = num(r.distance_to_Z);
    j["positivity_margin"] = num(r.positivity_margin);
    j["kernel_gap"] = num(r.kernel_gap);
    j["near_kernel"] = r.near_kernel;
    j["gradient_check"] = num(r.gradient_check);
    j["decay_slope"] = num(r.decay_slope);
    return j;
}

std::string field_csv(const SphereField& v) {
    std::ostringstream s;
    const int d = v.basis->dim() + 1;
    for (int i = 0; i < d; ++i) s << "z" << i + 1 << ",";
    s << "value\n";
    const Eigen::VectorXd values = v.values();
    const auto& nodes = v.basis->nodes();
    s << std::setprecision(12);
    for (std::size_t j = 0; j < nodes.size(); ++j) {
        for (int i = 0; i < d; ++i) s << nodes[j][i] << ",";
        s << values[static_cast<Eigen::Index>(j)] << "\n";
    }
    return s.str();
}

}  // namespace qgamma
