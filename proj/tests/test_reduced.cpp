#include <cmath>
#include <random>

#include "doctest.h"
#include "qgamma/bubbles.hpp"
#include "qgamma/errors.hpp"
#include "qgamma/reduced.hpp"
#include "qgamma/special.hpp"

using namespace qgamma;

namespace {

PointN random_point(int n, std::mt19937& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    PointN x(n);
    for (int i = 0; i < n; ++i) x[i] = u(rng);
    return x;
}

CurvatureField shifted(const CurvatureField& k, const PointN& a) {
    CurvatureField out = k;
    out.eval = [k, a](const PointN& x) { return k.value(PointN(x - a)); };
    out.grad = [k, a](const PointN& x) { return k.gradient(PointN(x - a)); };
    out.hessian = [k, a](const PointN& x) { return k.hessian_at(PointN(x - a)); };
    return out;
}

}  // namespace

TEST_CASE("c0 matches its Beta-function closed form") {
    for (auto [n, g] : {std::pair{1, 0.25}, {2, 0.5}, {3, 0.5}, {3, 1.0}}) {
        const auto params = make_params(n, g);
        CHECK(c0(params) == doctest::Approx(c0_closed_form(params)).epsilon(1e-10));
    }
    // n = 1, gamma = 1/4: p + 1 = 4 and int (1+x^2)^{-1} = pi.
    const auto params = make_params(1, 0.25);
    const double alpha = bubble_constant(params).alpha;
    CHECK(c0(params) == doctest::Approx(std::pow(alpha, 4.0) * M_PI / 4.0).epsilon(1e-12));
}

TEST_CASE("c1 guard and value") {
    CHECK_THROWS_AS(c1(make_params(2, 0.5)), DomainError);
    try {
        c1(make_params(1, 0.25));
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("divergent") != std::string::npos);
    }
    const auto params = make_params(3, 0.5);
    const double alpha = bubble_constant(params).alpha;
    // int |y|^2 (1+|y|^2)^{-3} dy = 4 pi B(5/2, 1/2) / 2.
    const double expected = std::pow(alpha, params.p + 1.0) * 4.0 * M_PI * 0.5 * special::beta(2.5, 0.5) /
                            (3.0 * (params.p + 1.0));
    CHECK(c1(params) > 0.0);
    CHECK(c1(params) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("normalization, translation and scaling") {
    const auto params = make_params(2, 0.5);
    ReducedFunctional one(builtin_curvature("constant", 2), params);
    for (double mu : {0.0, 0.3, 1.0, 2.0, 4.0}) {
        for (double x : {-1.0, 0.0, 0.5, 1.0, 2.0}) {
            PointN xi(2);
            xi << x, -0.5 * x;
            CHECK(one.eval(mu, xi) == doctest::Approx(one.c0()).epsilon(1e-12));
            CHECK(one.grad(mu, xi).norm() < 1e-9);
        }
    }
    const auto k = builtin_curvature("two_bump", 2);
    PointN a(2);
    a << 0.4, -0.3;
    ReducedFunctional base(k, params), moved(shifted(k, a), params);
    std::mt19937 rng(5);
    for (int i = 0; i < 5; ++i) {
        const PointN xi = random_point(2, rng);
        const double mu = 0.2 + 0.3 * i;
        CHECK(moved.eval(mu, PointN(xi + a)) == doctest::Approx(base.eval(mu, xi)).epsilon(1e-10));
        // K(lambda x): Gamma(mu, xi) = Gamma_K(lambda mu, lambda xi).
        const double lambda = 1.7;
        CurvatureField scaled = k;
        scaled.eval = [k, lambda](const PointN& x) { return k.value(PointN(lambda * x)); };
        ReducedFunctional rs(scaled, params);
        CHECK(rs.eval(mu, xi) == doctest::Approx(base.eval(lambda * mu, PointN(lambda * xi))).epsilon(1e-10));
        CHECK(base.eval(-mu, xi) == base.eval(mu, xi));
    }
}

TEST_CASE("derivative lemmas at mu = 0") {
    std::mt19937 rng(17);
    for (int n : {1, 2, 3}) {
        const auto params = make_params(n, n == 1 ? 0.25 : 0.5);
        ReducedFunctional rf(builtin_curvature("two_bump", n), params);
        for (int i = 0; i < 10; ++i) {
            const PointN xi = random_point(n, rng, 1.5);
            CHECK(std::abs(rf.grad(0.0, xi)[0]) <= 1e-9);
            CHECK(std::abs(rf.mu_derivative_at_zero(xi)) <= 1e-9);
        }
    }
}

TEST_CASE("gradient matches central differences") {
    std::mt19937 rng(23);
    for (int n : {1, 2}) {
        const auto params = make_params(n, n == 1 ? 0.25 : 0.5);
        ReducedFunctional rf(builtin_curvature("two_bump", n), params);
        for (int probe = 0; probe < 20; ++probe) {
            const PointN xi = random_point(n, rng, 1.5);
            const double mu = probe == 0 ? 0.7 : 0.2 + 0.1 * probe;
            const Eigen::VectorXd g = rf.grad(mu, xi);
            const double h = 1e-5;
            Eigen::VectorXd fd(n + 1);
            fd[0] = (rf.eval(mu + h, xi) - rf.eval(mu - h, xi)) / (2 * h);
            for (int i = 0; i < n; ++i) {
                PointN xp = xi, xm = xi;
                xp[i] += h;
                xm[i] -= h;
                fd[i + 1] = (rf.eval(mu, xp) - rf.eval(mu, xm)) / (2 * h);
            }
            CHECK((g - fd).norm() <= 1e-6 * std::max(1.0, g.norm()));
        }
    }
}

TEST_CASE("radial K has no xi-gradient at the origin") {
    const auto params = make_params(2, 0.5);
    ReducedFunctional rf(builtin_curvature("gaussian", 2), params);
    for (double mu : {0.3, 1.0, 2.5}) CHECK(rf.grad(mu, PointN::Zero(2)).tail(2).norm() < 1e-12);
}

TEST_CASE("second mu-derivative at zero equals c1 times the Laplacian (n = 3)") {
    const auto params = make_params(3, 0.5);
    ReducedFunctional rf(builtin_curvature("gaussian", 3), params);
    const auto h = gamma_hessian_mu0(PointN::Zero(3), rf);
    CHECK(h.value == doctest::Approx(-6.0 * c1(params)).epsilon(1e-12));
    CHECK(std::abs(h.second_difference / h.value - 1.0) < 1e-4);
    PointN xi(3);
    xi << 0.3, -0.2, 0.1;
    const auto off = gamma_hessian_mu0(xi, rf);
    CHECK(std::abs(off.second_difference / off.value - 1.0) < 1e-4);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(gamma_mixed_mu0(xi, i, rf)) <= 1e-6);

    // Linear K: every second derivative vanishes.
    CurvatureField linear;
    linear.n = 3;
    linear.eval = [](const PointN& x) { return 1.0 + 0.1 * x[0]; };
    linear.grad = [](const PointN& x) { PointN g = PointN::Zero(x.size()); g[0] = 0.1; return g; };
    linear.hessian = [](const PointN& x) { return MatrixN::Zero(x.size(), x.size()); };
    ReducedFunctional lf(linear, params);
    CHECK(gamma_hessian_mu0(xi, lf).value == 0.0);
}

TEST_CASE("homogeneous coefficient and its limit") {
    const auto params = make_params(3, 0.5);
    // Equal coefficients: A = a n (1/(p+1)) int |y_1|^beta z0^{p+1}.
    const auto model = power_model(1.5, {-1.0, -1.0, -1.0});
    const auto single = power_model(1.5, {-1.0, 0.0, 0.0});
    CHECK(a_xi(model, params) == doctest::Approx(3.0 * a_xi(single, params)).epsilon(1e-10));
    // Odd Q contributes nothing.
    HomogeneousModel odd;
    odd.beta = 2.0;
    odd.Q = [](const PointN& y) { return y[0] * std::abs(y[0]); };
    CHECK(std::abs(a_xi(odd, params)) < 1e-12);
    CHECK_THROWS_AS(a_xi(power_model(2.0, {1.0, 1.0}), make_params(2, 0.5)), DomainError);

    // Quadratic model from the Hessian reproduces c1 Laplacian / 2.
    const auto k = builtin_curvature("gaussian", 3);
    auto quad = quadratic_model(k.hessian_at(PointN::Zero(3)));
    CHECK(a_xi(quad, params) == doctest::Approx(0.5 * c1(params) * -6.0).epsilon(1e-9));

    ReducedFunctional rf(k, params);
    const auto smooth = a_xi_limit_check(rf, PointN::Zero(3), quad);
    CHECK(smooth.relative_error <= 1e-3);

    ReducedFunctional cusp(builtin_curvature("cusp", 3), params);
    const auto rough = a_xi_limit_check(cusp, PointN::Zero(3), model);
    CHECK(rough.relative_error <= 1e-3);
}

TEST_CASE("landscape scan layout") {
    const auto params = make_params(1, 0.25);
    ReducedFunctional rf(builtin_curvature("constant", 1), params);
    Box box{PointN(2), PointN(2)};
    box.lower << 0.1, -1.0;
    box.upper << 1.0, 1.0;
    const auto rows = landscape_scan(rf, box, 3);
    CHECK(rows.size() == 9);
    for (const auto& row : rows) CHECK(row.grad_norm <= 1e-9);
    const std::string csv = landscape_csv(rows, 1);
    CHECK(csv.rfind("mu,xi_1,gamma,grad_norm\n", 0) == 0);
}

TEST_CASE("boundary repulsion for a decreasing radial K") {
    const auto params = make_params(2, 0.5);
    ReducedFunctional rf(builtin_curvature("gaussian", 2), params);
    const double R = 2.0;
    for (int k = 0; k < 100; ++k) {
        // Probes on the upper half of the sphere |q| = R in (mu, xi) space.
        const double theta = M_PI * (k + 0.5) / 100.0 - 0.5 * M_PI;
        const double phi = 2.0 * M_PI * k * 0.618033988749895;
        PointN q(3);
        q << R * std::cos(theta) * std::abs(std::cos(phi)), R * std::cos(theta) * std::sin(phi), R * std::sin(theta);
        const Eigen::VectorXd g = rf.grad(q[0], q.tail(2));
        CHECK(g.dot(Eigen::VectorXd(q)) < 0.0);
    }
}
