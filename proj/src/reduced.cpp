#include "qgamma/reduced.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "qgamma/bubbles.hpp"
#include "qgamma/errors.hpp"
#include "qgamma/parallel.hpp"
#include "qgamma/special.hpp"

namespace qgamma {

using std::numbers::pi;

namespace {

// Radial part of int f(y) (1+|y|^2)^{-n} dy after r = tan t: returns the
// tanh-sinh sum with weight sin^{n-1} t cos^{n-1} t, calling radial(r, w).
template <typename Radial>
bool tanh_sinh(int n, double tol, int max_level, int components, Radial&& radial, Eigen::VectorXd& result,
               double& error, double abs_scale = 0.0) {
    constexpr double u_max = 4.0;
    // Compensated accumulation across radial nodes; each node sums its own angular rule.
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(components);
    Eigen::VectorXd carry = Eigen::VectorXd::Zero(components);
    Eigen::VectorXd local(components);
    Eigen::VectorXd previous = Eigen::VectorXd::Zero(components);
    auto node = [&](double u) {
        const double s = 0.5 * pi * std::sinh(u);
        const double e = std::exp(-2.0 * std::abs(s));
        // 1 - tanh|s| and 1 + tanh|s| without cancellation.
        const double small = 2.0 * e / (1.0 + e);
        const double big = 2.0 / (1.0 + e);
        const double lo = 0.25 * pi * (s >= 0 ? big : small);  // t
        const double hi = 0.25 * pi * (s >= 0 ? small : big);  // pi/2 - t
        const double sech = 2.0 * std::sqrt(e) / (1.0 + e);
        const double jac = 0.25 * pi * 0.5 * pi * std::cosh(u) * sech * sech;
        if (jac == 0.0 || lo == 0.0 || hi == 0.0) return;
        const double r = lo < hi ? std::tan(lo) : 1.0 / std::tan(hi);
        const double sc = std::sin(lo) * std::sin(hi);
        local.setZero();
        radial(r, jac * std::pow(sc, n - 1), local);
        const Eigen::VectorXd y = local - carry;
        const Eigen::VectorXd t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    };
    double h = 1.0;
    for (int k = -static_cast<int>(u_max); k <= static_cast<int>(u_max); ++k) node(k * h);
    result = h * sum;
    for (int level = 1; level <= max_level; ++level) {
        h *= 0.5;
        const int count = static_cast<int>(u_max / h);
        for (int k = -count + 1; k <= count - 1; k += 2) node(k * h);
        previous = result;
        result = h * sum;
        const double scale = std::max({result.cwiseAbs().maxCoeff(), abs_scale, std::numeric_limits<double>::min()});
        error = (result - previous).cwiseAbs().maxCoeff() / scale;
        if (level >= 4 && error <= tol) return true;
    }
    return false;
}

}  // namespace

ReducedFunctional::ReducedFunctional(CurvatureField K, ProblemParams params, ReducedQuadrature quad)
    : K_(std::move(K)), params_(params), quad_(quad) {
    if (K_.n != params_.n) throw ShapeError("ReducedFunctional: K dimension does not match n");
    special::sphere_rule(params_.n, quad_.circle_nodes, quad_.polar_nodes, quad_.azimuth_nodes, directions_, direction_weights_);
    const double alpha = bubble_constant(params_).alpha;
    weight_scale_ = std::pow(alpha, params_.p + 1.0) / (params_.p + 1.0);
    c0_ = qgamma::c0(params_, quad_);
}

Eigen::VectorXd ReducedFunctional::integrate(const Integrand& g, int components, double* error,
                                             double abs_scale) const {
    Eigen::VectorXd result;
    double err = 0.0;
    auto radial = [&](double r, double w, Eigen::VectorXd& acc) {
        for (std::size_t j = 0; j < directions_.size(); ++j) g(r, directions_[j], w * direction_weights_[j], acc);
    };
    const bool ok =
        tanh_sinh(params_.n, quad_.tolerance, quad_.max_level, components, radial, result, err, abs_scale / weight_scale_);
    result *= weight_scale_;
    if (error) *error = err;
    if (!ok && quad_.strict) {
        throw AccuracyError("reduced functional quadrature did not converge", result.size() ? result[0] : 0.0, err);
    }
    return result;
}

double ReducedFunctional::eval(double mu, const PointN& xi) const {
    if (xi.size() != params_.n) throw ShapeError("gamma_eval: xi dimension mismatch");
    mu = std::abs(mu);
    if (mu == 0.0) return c0_ * K_.value(xi);
    const Eigen::VectorXd v = integrate(
        [&](double r, const PointN& w, double weight, Eigen::VectorXd& acc) {
            acc[0] += weight * K_.value(PointN(mu * r * w + xi));
        },
        1);
    return v[0];
}

Eigen::VectorXd ReducedFunctional::grad(double mu, const PointN& xi) const {
    if (xi.size() != params_.n) throw ShapeError("gamma_grad: xi dimension mismatch");
    const int n = params_.n;
    Eigen::VectorXd out(n + 1);
    if (mu == 0.0) {
        out[0] = 0.0;
        out.tail(n) = c0_ * K_.gradient(xi);
        return out;
    }
    const double m = std::abs(mu);
    const Eigen::VectorXd v = integrate(
        [&](double r, const PointN& w, double weight, Eigen::VectorXd& acc) {
            const PointN g = K_.gradient(PointN(m * r * w + xi));
            acc[0] += weight * r * g.dot(w);
            acc.tail(n) += weight * g;
        },
        n + 1, nullptr, 1e-6 * c0_);
    out = v;
    if (mu < 0.0) out[0] = -out[0];
    return out;
}

double ReducedFunctional::mu_derivative_at_zero(const PointN& xi) const {
    const int n = params_.n;
    const PointN g = K_.gradient(xi);
    // First moment of the weight: odd in y, so the symmetric rule cancels it.
    const Eigen::VectorXd v = integrate(
        [&](double r, const PointN& w, double weight, Eigen::VectorXd& acc) { acc.head(n) += weight * r * w; }, n,
        nullptr, c0_);
    return g.dot(v);
}

double c0(const ProblemParams& params, const ReducedQuadrature& quad) {
    Eigen::VectorXd result;
    double err = 0.0;
    const double area = special::sphere_area(params.n);
    auto radial = [&](double, double w, Eigen::VectorXd& acc) { acc[0] += w * area; };
    if (!tanh_sinh(params.n, quad.tolerance, quad.max_level, 1, radial, result, err)) {
        throw AccuracyError("c0 quadrature did not converge", result[0], err);
    }
    const double alpha = bubble_constant(params).alpha;
    return std::pow(alpha, params.p + 1.0) / (params.p + 1.0) * result[0];
}

double c0_closed_form(const ProblemParams& params) {
    const double alpha = bubble_constant(params).alpha;
    const int n = params.n;
    return std::pow(alpha, params.p + 1.0) * special::sphere_area(n) * special::beta(0.5 * n, 0.5 * n) /
           (2.0 * (params.p + 1.0));
}

double c1(const ProblemParams& params, const ReducedQuadrature& quad) {
    if (params.n <= 2) {
        throw DomainError("c₁ integral divergent: |y|²z₀^{p+1} ~ |y|^{2−2n}");
    }
    Eigen::VectorXd result;
    double err = 0.0;
    const double area = special::sphere_area(params.n);
    auto radial = [&](double r, double w, Eigen::VectorXd& acc) { acc[0] += w * area * r * r; };
    if (!tanh_sinh(params.n, quad.tolerance, quad.max_level, 1, radial, result, err)) {
        throw AccuracyError("c1 quadrature did not converge", result[0], err);
    }
    const double alpha = bubble_constant(params).alpha;
    return std::pow(alpha, params.p + 1.0) / (params.p + 1.0) * result[0] / params.n;
}

std::pair<double, double> richardson(const std::vector<double>& steps, const std::vector<double>& values,
                                     const std::vector<double>& exponents, const std::vector<bool>& logarithmic) {
    auto solve = [&](std::size_t first, std::size_t terms) {
        const std::size_t rows = values.size() - first;
        Eigen::MatrixXd A(rows, terms + 1);
        Eigen::VectorXd b(rows);
        for (std::size_t i = 0; i < rows; ++i) {
            A(i, 0) = 1.0;
            for (std::size_t j = 0; j < terms; ++j) {
                const double h = steps[first + i];
                A(i, j + 1) = std::pow(h, exponents[j]);
                if (j < logarithmic.size() && logarithmic[j]) A(i, j + 1) *= std::log(h);
            }
            b[i] = values[first + i];
        }
        return A.colPivHouseholderQr().solve(b)[0];
    };
    const std::size_t terms = std::min(exponents.size(), values.size() - 1);
    const double best = solve(0, terms);
    const double coarser = terms > 0 ? solve(1, terms - 1) : values.back();
    return {best, std::abs(best - coarser)};
}

HessianMu0 gamma_hessian_mu0(const PointN& xi, const ReducedFunctional& rf) {
    const auto& params = rf.params();
    HessianMu0 out;
    const double lap = rf.curvature().laplacian(xi);
    out.value = c1(params, rf.quadrature()) * lap;
    const double g0 = rf.eval(0.0, xi);
    std::vector<double> steps = {0.08, 0.04, 0.02, 0.01};
    std::vector<double> values;
    for (double h : steps) values.push_back(2.0 * (rf.eval(h, xi) - g0) / (h * h));
    // Corrections h^{n-2}, h^2, h^n from the algebraic tail and the Taylor remainder.
    std::vector<double> exponents = {static_cast<double>(params.n) - 2.0, 2.0, static_cast<double>(params.n)};
    std::sort(exponents.begin(), exponents.end());
    exponents.erase(std::unique(exponents.begin(), exponents.end()), exponents.end());
    const auto [estimate, error] = richardson(steps, values, exponents);
    out.second_difference = estimate;
    out.extrapolation_error = error;
    return out;
}

double gamma_mixed_mu0(const PointN& xi, int i, const ReducedFunctional& rf) {
    // D_mu Gamma(h, .) = h c1 Laplacian K + O(h^2): two step sizes cancel the linear term
    const double h = 1e-5, delta = 1e-4;
    PointN xp = xi, xm = xi;
    xp[i] += delta;
    xm[i] -= delta;
    auto at = [&](double step) { return (rf.grad(step, xp)[0] - rf.grad(step, xm)[0]) / (2.0 * delta); };
    return 2.0 * at(0.5 * h) - at(h);
}

HomogeneousModel power_model(double beta, std::vector<double> coefficients) {
    HomogeneousModel m;
    m.beta = beta;
    m.Q = [beta, coefficients](const PointN& y) {
        double v = 0.0;
        for (std::size_t j = 0; j < coefficients.size(); ++j) v += coefficients[j] * std::pow(std::abs(y[static_cast<Eigen::Index>(j)]), beta);
        return v;
    };
    return m;
}

HomogeneousModel quadratic_model(const MatrixN& hessian) {
    HomogeneousModel m;
    m.beta = 2.0;
    m.Q = [hessian](const PointN& y) { return 0.5 * y.dot(hessian * y); };
    return m;
}

double a_xi(const HomogeneousModel& model, const ProblemParams& params, double tol) {
    const int n = params.n;
    if (!(model.beta > 1.0 && model.beta < n)) {
        throw DomainError("A_xi requires 1 < beta < n for the homogeneous expansion (K3); got beta = " +
                          std::to_string(model.beta));
    }
    // Radial part: int_0^inf r^{beta+n-1} (1+r^2)^{-n} dr = B((n+beta)/2, (n-beta)/2)/2.
    const double radial = 0.5 * special::beta(0.5 * (n + model.beta), 0.5 * (n - model.beta));
    // Angular part by adaptive quadrature with breaks where coordinates change sign.
    double angular = 0.0;
    if (n == 2) {
        for (int q = 0; q < 4; ++q) {
            angular += special::integrate_gk(
                [&](double t) {
                    PointN w(2);
                    w << std::cos(t), std::sin(t);
                    return model.Q(w);
                },
                q * 0.5 * pi, (q + 1) * 0.5 * pi, tol);
        }
    } else {
        for (int a = 0; a < 2; ++a) {
            angular += special::integrate_gk(
                [&](double theta) {
                    double inner = 0.0;
                    for (int q = 0; q < 4; ++q) {
                        inner += special::integrate_gk(
                            [&](double phi) {
                                PointN w(3);
                                w << std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta);
                                return model.Q(w);
                            },
                            q * 0.5 * pi, (q + 1) * 0.5 * pi, tol);
                    }
                    return inner * std::sin(theta);
                },
                a * 0.5 * pi, (a + 1) * 0.5 * pi, tol);
        }
    }
    const double alpha = bubble_constant(params).alpha;
    return std::pow(alpha, params.p + 1.0) / (params.p + 1.0) * radial * angular;
}

LimitCheck a_xi_limit_check(const ReducedFunctional& rf, const PointN& xi, const HomogeneousModel& model,
                            std::vector<double> correction_exponents) {
    const int n = rf.params().n;
    const double beta = model.beta;
    LimitCheck out;
    out.A = model.A != 0.0 ? model.A : a_xi(model, rf.params());
    out.mus = {0.2, 0.1, 0.05, 0.025};
    const double g0 = rf.eval(0.0, xi);
    for (double mu : out.mus) out.ratios.push_back((rf.eval(mu, xi) - g0) / std::pow(mu, beta));
    if (correction_exponents.empty()) {
        // Algebraic tail of the weight (mu^{n-beta}, mu^{n-beta+2}) and the next local order.
        correction_exponents = {n - beta, n - beta + 2.0, beta < 2.0 ? beta : 2.0};
    }
    // A repeated exponent is a resonance: the pair becomes mu^e log mu, mu^e.
    std::sort(correction_exponents.begin(), correction_exponents.end());
    std::vector<double> exps;
    std::vector<bool> logs;
    for (std::size_t j = 0; j < correction_exponents.size(); ++j) {
        const double e = correction_exponents[j];
        if (!exps.empty() && std::abs(exps.back() - e) < 1e-12) {
            if (logs.back()) continue;
            logs.back() = true;
            exps.push_back(e);
            logs.push_back(false);
        } else {
            exps.push_back(e);
            logs.push_back(false);
        }
    }
    if (exps.size() > 3) {
        exps.resize(3);
        logs.resize(3);
    }
    out.exponents = exps;
    out.logarithmic = logs;
    const auto [estimate, error] = richardson(out.mus, out.ratios, out.exponents, out.logarithmic);
    out.extrapolated = estimate;
    out.extrapolation_error = error;
    out.relative_error = std::abs(estimate - out.A) / std::abs(out.A);
    return out;
}

std::vector<LandscapeRow> landscape_scan(const ReducedFunctional& rf, const Box& box, int resolution) {
    const int d = rf.params().n + 1;
    if (box.lower.size() != d || box.upper.size() != d) throw ShapeError("landscape_scan: box must live in R^{n+1}");
    if (resolution < 2) throw ValidationError("landscape_scan: resolution must be >= 2");
    std::size_t total = 1;
    for (int i = 0; i < d; ++i) total *= static_cast<std::size_t>(resolution);
    std::vector<LandscapeRow> rows(total);
    parallel_for(total, [&](std::size_t index) {
        std::size_t rest = index;
        std::array<double, 4> q{};
        for (int i = d - 1; i >= 0; --i) {
            const int k = static_cast<int>(rest % static_cast<std::size_t>(resolution));
            rest /= static_cast<std::size_t>(resolution);
            q[static_cast<std::size_t>(i)] = box.lower[i] + (box.upper[i] - box.lower[i]) * k / (resolution - 1);
        }
        LandscapeRow row;
        row.mu = q[0];
        row.xi = PointN::Zero(d - 1);
        for (int i = 1; i < d; ++i) row.xi[i - 1] = q[static_cast<std::size_t>(i)];
        row.gamma = rf.eval(row.mu, row.xi);
        row.grad_norm = rf.grad(row.mu, row.xi).norm();
        rows[index] = row;
    });
    return rows;
}

std::string landscape_csv(const std::vector<LandscapeRow>& rows, int n) {
    std::ostringstream out;
    out << "mu";
    for (int i = 1; i <= n; ++i) out << ",xi_" << i;
    out << ",gamma,grad_norm\n";
    out << std::setprecision(17);
    for (const auto& row : rows) {
        out << row.mu;
        for (int i = 0; i < n; ++i) out << ',' << row.xi[i];
        out << ',' << row.gamma << ',' << row.grad_norm << '\n';
    }
    return out.str();
}

}  // namespace qgamma
