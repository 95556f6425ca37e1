#include <cmath>
#include <random>

#include "doctest.h"
#include "qgamma/bubbles.hpp"
#include "qgamma/errors.hpp"
#include "qgamma/special.hpp"

using namespace qgamma;

TEST_CASE("measured bubble constant is flat and matches the closed form") {
    for (auto [n, g] : {std::pair{1, 0.25}, {2, 0.5}, {2, 0.75}, {3, 0.5}, {3, 1.0}}) {
        const auto params = make_params(n, g);
        const auto bc = bubble_constant(params);
        CHECK(bc.spread < 1e-6);
        CHECK(std::abs(bc.Lambda / bc.closed_form - 1.0) < 1e-6);
        CHECK(std::pow(bc.alpha, params.p - 1.0) == doctest::Approx(bc.Lambda).epsilon(1e-12));
    }
    // Classical Yamabe bubble: -Delta W = n(n-2) W^p with W = (1+r^2)^{-(n-2)/2}, n = 3.
    const auto bc = bubble_constant(make_params(3, 1.0));
    CHECK(bc.Lambda == doctest::Approx(3.0).epsilon(1e-7));
    CHECK(bc.alpha == doctest::Approx(std::pow(3.0, 0.25)).epsilon(1e-7));
}

TEST_CASE("bubble evaluation, scaling and PDE residual") {
    const auto params = make_params(2, 0.5);
    const double alpha = bubble_constant(params).alpha;
    const auto z0 = standard_bubble(params);
    CHECK(bubble_eval(z0, PointN::Zero(2)) == doctest::Approx(alpha));
    PointN xi(2);
    xi << 0.3, -0.4;
    const auto b = make_bubble(params, 0.6, xi);
    CHECK(bubble_eval(b, xi) == doctest::Approx(alpha * std::pow(0.6, -0.5)));
    PointN x(2);
    x << 1.1, 0.2;
    const double a = 0.5 * params.bubble_decay();
    const double scaled = std::pow(0.6, -a) * bubble_eval(z0, PointN((x - xi) / 0.6));
    CHECK(bubble_eval(b, x) == doctest::Approx(scaled).epsilon(1e-14));
    CHECK_THROWS_AS(make_bubble(params, 0.0, xi), ValidationError);

    for (auto [n, g] : {std::pair{1, 0.25}, {3, 0.5}}) {
        const auto pp = make_params(n, g);
        const auto zb = standard_bubble(pp);
        auto f = RadialFunction::sample([&](double r) { return bubble_eval_radial(zb, r); },
                                        log_nodes(1e-2, 1e2, 31), -pp.bubble_decay());
        const auto image = frac_laplacian_radial(f, pp);
        double worst = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < f.nodes.size(); ++i) {
            const double rhs = std::pow(f.values[i], pp.p);
            worst = std::max(worst, std::abs(image.values[i] - rhs));
            scale = std::max(scale, rhs);
        }
        CHECK(worst / scale < 1e-6);
    }
}

TEST_CASE("tangents match central differences") {
    const auto params = make_params(3, 0.5);
    PointN xi(3);
    xi << 0.2, -0.1, 0.4;
    const auto b = make_bubble(params, 0.8, xi);
    PointN x(3);
    x << 0.5, 0.7, -0.3;
    const Eigen::VectorXd t = bubble_tangents(b, x);
    const double h = 1e-5;
    const double dmu = (bubble_eval(make_bubble(params, 0.8 + h, xi), x) -
                        bubble_eval(make_bubble(params, 0.8 - h, xi), x)) / (2 * h);
    CHECK(t[0] == doctest::Approx(dmu).epsilon(1e-7));
    for (int i = 0; i < 3; ++i) {
        PointN xp = xi, xm = xi;
        xp[i] += h;
        xm[i] -= h;
        const double d = (bubble_eval(make_bubble(params, 0.8, xp), x) - bubble_eval(make_bubble(params, 0.8, xm), x)) / (2 * h);
        CHECK(t[i + 1] == doctest::Approx(d).epsilon(1e-7));
    }
    // Even profile about the center.
    const Eigen::VectorXd at_center = bubble_tangents(b, xi);
    for (int i = 1; i <= 3; ++i) CHECK(at_center[i] == 0.0);
}

TEST_CASE("weighted integral of the bubble collapses to a Beta function") {
    // z0^{p+1} = alpha^{p+1} (1+r^2)^{-n}; odd moments vanish.
    const auto params = make_params(1, 0.25);
    const auto z0 = standard_bubble(params);
    const double alpha = bubble_constant(params).alpha;
    double total = 0.0, first = 0.0;
    auto integrand = [&](double t) {
        const double x = std::tan(t);
        PointN y(1);
        y << x;
        return std::pow(bubble_eval(z0, y), params.p + 1.0) / (std::cos(t) * std::cos(t));
    };
    total = special::integrate_gk(integrand, -M_PI / 2, M_PI / 2, 1e-13);
    first = special::integrate_gk([&](double t) { return std::tan(t) * integrand(t); }, -M_PI / 2, M_PI / 2, 1e-13);
    const double expected = std::pow(alpha, params.p + 1.0) * special::sphere_area(1) * 0.5 * special::beta(0.5, 0.5);
    CHECK(total == doctest::Approx(expected).epsilon(1e-10));
    CHECK(std::abs(first) < 1e-12);
}

TEST_CASE("lifted bubble agrees with the conformal transport") {
    for (auto [n, g] : {std::pair{1, 0.25}, {2, 0.5}}) {
        const auto params = make_params(n, g);
        PointN xi = PointN::Constant(n, 0.3);
        const auto b = make_bubble(params, 0.7, xi);
        PointN x = PointN::Constant(n, -0.4);
        x[0] = 1.3;
        const double direct = bubble_eval(b, x) / conformal_weight(x, params);
        CHECK(lifted_bubble(b, plane_to_sphere(x)) == doctest::Approx(direct).epsilon(1e-13));
        // North pole limit alpha (mu/2)^a.
        PointN north = PointN::Zero(n + 1);
        north[n] = 1.0;
        const double alpha = bubble_constant(params).alpha;
        CHECK(lifted_bubble(b, north) == doctest::Approx(alpha * std::pow(0.35, 0.5 * params.bubble_decay())));
        // Lifted tangents against differences of the lift.
        const PointN zeta = plane_to_sphere(x);
        const Eigen::VectorXd t = lifted_tangents(b, zeta);
        const double h = 1e-6;
        const double dmu = (lifted_bubble(make_bubble(params, 0.7 + h, xi), zeta) -
                            lifted_bubble(make_bubble(params, 0.7 - h, xi), zeta)) / (2 * h);
        CHECK(t[0] == doctest::Approx(dmu).epsilon(1e-7));
        PointN xp = xi, xm = xi;
        xp[0] += h;
        xm[0] -= h;
        const double dxi = (lifted_bubble(make_bubble(params, 0.7, xp), zeta) - lifted_bubble(make_bubble(params, 0.7, xm), zeta)) / (2 * h);
        CHECK(t[1] == doctest::Approx(dxi).epsilon(1e-7));
    }
}

TEST_CASE("standard bubble lifts to the constant solution") {
    const auto params = make_params(2, 0.5);
    auto basis = std::make_shared<const SphereBasis>(2, 4);
    const auto v = lift_bubble(standard_bubble(params), basis);
    const Eigen::VectorXd values = v.values();
    const double c = values[0];
    CHECK((values.array() - c).abs().maxCoeff() < 1e-13);
    CHECK(std::pow(c, params.p - 1.0) == doctest::Approx(sphere_multiplier(0, params)).epsilon(1e-10));
}

TEST_CASE("kernel of the linearization is the tangent space (n = 1)") {
    const auto params = make_params(1, 0.25);
    PointN xi(1);
    xi << 0.2;
    const auto op = linearized_operator(make_bubble(params, 0.8, xi), 64);
    CHECK((op.matrix - op.matrix.transpose()).norm() == 0.0);
    CHECK_FALSE(op.tail_warning);
    const auto report = kernel_check(op);
    CHECK(report.dim == 2);
    CHECK(report.negatives == 1);
    CHECK(report.gap_ratio > 100.0);
    for (double angle : report.angles) CHECK(angle < 1e-3);
    CHECK(report.pass);

    // A generic symmetric perturbation destroys the kernel.
    std::mt19937 rng(11);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd noise(op.matrix.rows(), op.matrix.cols());
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = normal(rng);
    noise = 0.5 * (noise + noise.transpose()).eval();
    LinearizedOperator perturbed = op;
    perturbed.matrix += 1e-3 * noise / noise.norm() * op.matrix.norm();
    CHECK(kernel_check(perturbed).dim == 0);
}

TEST_CASE("kernel of the linearization is the tangent space (n = 2, small L)") {
    const auto params = make_params(2, 0.5);
    PointN xi(2);
    xi << 0.1, -0.05;
    const auto op = linearized_operator(make_bubble(params, 0.9, xi), 20);
    const auto report = kernel_check(op);
    CHECK(report.dim == 3);
    CHECK(report.negatives == 1);
    for (double angle : report.angles) CHECK(angle < 1e-3);
}
