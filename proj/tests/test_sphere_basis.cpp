#include <cmath>
#include <random>

#include "doctest.h"
#include "qgamma/errors.hpp"
#include "qgamma/sphere_basis.hpp"

using namespace qgamma;

namespace {

Eigen::VectorXd random_coeffs(std::size_t size, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> normal;
    Eigen::VectorXd c(static_cast<Eigen::Index>(size));
    for (auto& v : c) v = normal(rng);
    return c;
}

}  // namespace

TEST_CASE("collocation round trip and Parseval") {
    for (auto [n, L] : {std::pair{1, 16}, {2, 12}}) {
        SphereBasis basis(n, L);
        const Eigen::VectorXd c = random_coeffs(basis.size(), 7);
        const Eigen::VectorXd values = basis.synthesize(c);
        CHECK((basis.analyze(values) - c).norm() < 1e-10 * c.norm());
        const double l2 = basis.weights().dot(values.cwiseProduct(values));
        CHECK(std::abs(l2 - c.squaredNorm()) < 1e-12 * c.squaredNorm());
        CHECK(basis.weights().sum() == doctest::Approx(n == 1 ? 2.0 * M_PI : 4.0 * M_PI).epsilon(1e-13));
        for (std::size_t i = 0; i < basis.node_count(); i += 17) {
            CHECK(basis.evaluate(c, basis.nodes()[i]) == doctest::Approx(values[static_cast<Eigen::Index>(i)]).epsilon(1e-11));
        }
    }
}

TEST_CASE("nodes avoid the north pole") {
    for (auto [n, L] : {std::pair{1, 15}, {2, 10}}) {
        SphereBasis basis(n, L, 3);
        for (const auto& zeta : basis.nodes()) CHECK(zeta[n] < 1.0 - 1e-6);
    }
}

TEST_CASE("degree blocks and multipliers") {
    SphereBasis basis(2, 4);
    CHECK(basis.size() == 25);
    CHECK(basis.degrees()[0] == 0);
    CHECK(basis.degrees()[3] == 1);
    CHECK(basis.degrees()[4] == 2);
    const auto params = make_params(2, 0.5);
    const Eigen::VectorXd lambda = basis.multipliers(params);
    // gamma = 1/2 on S^2: Gamma(l + 3/2)/Gamma(l + 1/2) = l + 1/2.
    for (std::size_t i = 0; i < basis.size(); ++i) CHECK(lambda[static_cast<Eigen::Index>(i)] == doctest::Approx(basis.degrees()[i] + 0.5));
    CHECK_THROWS_AS(SphereBasis(3, 4), ValidationError);
    CHECK_THROWS_AS(basis.synthesize(Eigen::VectorXd::Zero(3)), ShapeError);
}

TEST_CASE("zonal degree-one harmonic is the height function") {
    SphereBasis basis(2, 3);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(16);
    c[1] = 1.0;
    PointN zeta(3);
    zeta << 0.6, 0.0, 0.8;
    CHECK(basis.evaluate(c, zeta) == doctest::Approx(std::sqrt(3.0 / (4.0 * M_PI)) * 0.8).epsilon(1e-14));
}

TEST_CASE("sphere multipliers agree with the plane operator through the conformal lift") {
    // v = a + b zeta_{n+1} on S^n; u = w (v o F) is radial on R^n.
    for (auto [n, g] : {std::pair{1, 0.25}, {2, 0.5}, {2, 0.75}}) {
        const auto params = make_params(n, g);
        const double a = 0.7, b = 0.2;
        const double lambda0 = sphere_multiplier(0, params), lambda1 = sphere_multiplier(1, params);
        const double decay = params.bubble_decay();
        auto u = RadialFunction::sample(
            [&](double r) {
                const double h = (r * r - 1.0) / (r * r + 1.0);
                return std::pow(2.0 / (1.0 + r * r), 0.5 * decay) * (a + b * h);
            },
            log_nodes(1e-2, 1e2, 21), -decay);
        const auto image = frac_laplacian_radial(u, params);
        for (std::size_t i = 0; i < u.nodes.size(); ++i) {
            const double r = u.nodes[i];
            const double h = (r * r - 1.0) / (r * r + 1.0);
            const double w = std::pow(2.0 / (1.0 + r * r), 0.5 * decay);
            const double expected = std::pow(w, params.p) * (lambda0 * a + lambda1 * b * h);
            CHECK(image.values[i] == doctest::Approx(expected).epsilon(1e-6));
        }
    }
}

TEST_CASE("lift and pull are inverse on band-limited data") {
    const auto params = make_params(2, 0.5);
    auto basis = std::make_shared<const SphereBasis>(2, 6);
    SphereField v{basis, random_coeffs(basis->size(), 3)};
    ScalarField u = [&](const PointN& x) { return pull_to_plane(v, params, x); };
    const SphereField back = lift_to_sphere(u, params, basis);
    CHECK((back.coeffs - v.coeffs).norm() < 1e-11 * v.coeffs.norm());
}
