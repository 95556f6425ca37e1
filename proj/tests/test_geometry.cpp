#include <boost/math/special_functions/hypergeometric_1F1.hpp>
#include <cmath>

#include "doctest.h"
#include "qgamma/errors.hpp"
#include "qgamma/geometry.hpp"

using namespace qgamma;

namespace {

// (-Delta)^g (1+r^2)^{-(n-2g)/2} = 2^{2g} Gamma((n+2g)/2)/Gamma((n-2g)/2) (1+r^2)^{-(n+2g)/2}.
double bubble_image(double r, int n, double g) {
    return std::pow(2.0, 2.0 * g) * std::tgamma(0.5 * n + g) / std::tgamma(0.5 * n - g) *
           std::pow(1.0 + r * r, -0.5 * n - g);
}

// (-Delta)^g exp(-r^2) = 4^g Gamma(n/2+g)/Gamma(n/2) 1F1(n/2+g; n/2; -r^2).
double gaussian_image(double r, int n, double g) {
    return std::pow(4.0, g) * std::tgamma(0.5 * n + g) / std::tgamma(0.5 * n) *
           boost::math::hypergeometric_1F1(0.5 * n + g, 0.5 * n, -r * r);
}

}  // namespace

TEST_CASE("parameter validation names the violated bound") {
    CHECK_THROWS_AS(make_params(0, 0.25), ValidationError);
    CHECK_THROWS_AS(make_params(4, 0.25), ValidationError);
    CHECK_THROWS_AS(make_params(2, 0.0), ValidationError);
    CHECK_THROWS_AS(make_params(1, 0.5), ValidationError);
    try {
        make_params(1, 0.6);
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("n/2") != std::string::npos);
    }
    const auto params = make_params(2, 0.5);
    CHECK(params.p == doctest::Approx(3.0));
    CHECK(params.two_star == doctest::Approx(4.0));
}

TEST_CASE("radial transform reproduces the bubble identity") {
    for (auto [n, g] : {std::pair{1, 0.25}, {2, 0.5}, {2, 0.75}, {3, 0.5}, {3, 1.0}}) {
        const auto params = make_params(n, g);
        const double a = 0.5 * params.bubble_decay();
        auto f = RadialFunction::sample([a](double r) { return std::pow(1.0 + r * r, -a); },
                                        log_nodes(1e-2, 1e2, 41), -2.0 * a);
        const auto out = frac_laplacian_radial(f, params);
        for (std::size_t i = 0; i < f.nodes.size(); ++i) {
            const double expected = bubble_image(f.nodes[i], n, g);
            INFO(n, " ", g, " ", f.nodes[i], " ", out.values[i] / expected - 1.0);
            CHECK(std::abs(out.values[i] / expected - 1.0) < 1e-7);
        }
    }
}

TEST_CASE("radial transform of a Gaussian matches the Kummer closed form") {
    for (auto [n, g] : {std::pair{1, 0.25}, {2, 0.5}, {3, 1.2}}) {
        const auto params = make_params(n, g);
        auto f = RadialFunction::sample([](double r) { return std::exp(-r * r); },
                                        log_nodes(5e-2, 4.0, 25),
                                        -std::numeric_limits<double>::infinity());
        const auto out = frac_laplacian_radial(f, params);
        for (std::size_t i = 0; i < f.nodes.size(); ++i) {
            const double expected = gaussian_image(f.nodes[i], n, g);
            INFO(n, " ", g, " ", f.nodes[i]);
            CHECK(std::abs(out.values[i] - expected) < 1e-8 * std::abs(gaussian_image(0.0, n, g)));
        }
    }
}

TEST_CASE("order one reduces to minus the Laplacian") {
    const auto params = make_params(3, 1.0);
    auto f = RadialFunction::sample([](double r) { return std::exp(-r * r); }, log_nodes(0.05, 3.0, 15),
                                    -std::numeric_limits<double>::infinity());
    const auto out = frac_laplacian_radial(f, params);
    for (std::size_t i = 0; i < f.nodes.size(); ++i) {
        const double r = f.nodes[i];
        CHECK(out.values[i] == doctest::Approx((6.0 - 4.0 * r * r) * std::exp(-r * r)).epsilon(1e-8));
    }
}

TEST_CASE("small order approaches the identity") {
    const auto params = make_params(2, 1e-6);
    auto f = RadialFunction::sample([](double r) { return std::exp(-r * r); }, log_nodes(0.1, 2.0, 9),
                                    -std::numeric_limits<double>::infinity());
    const auto out = frac_laplacian_radial(f, params);
    for (std::size_t i = 0; i < f.nodes.size(); ++i) {
        CHECK(std::abs(out.values[i] - f.values[i]) < 1e-4);
    }
}

TEST_CASE("power-law multiplier vanishes at the bubble decay rate") {
    const auto params = make_params(3, 0.5);
    CHECK(std::abs(power_law_multiplier(params.bubble_decay() - 1e-12, params)) < 1e-9);
    // s = n/2 - gamma is the Sobolev-critical line; value is Gamma ratio squared times 4^gamma.
    const double s = 1.0;
    const double expected = 2.0 * std::tgamma(1.0) * std::tgamma(1.0) /
                            (std::tgamma(0.5) * std::tgamma(0.5));
    CHECK(power_law_multiplier(s, params) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("spline-only input and extrapolation rules") {
    auto nodes = log_nodes(1e-2, 1e2, 401);
    std::vector<double> values;
    for (double r : nodes) values.push_back(1.0 / (1.0 + r * r));
    auto f = RadialFunction::from_samples(nodes, values, -2.0);
    CHECK(f(0.5) == doctest::Approx(0.8).epsilon(1e-6));
    CHECK(f(1e3) == doctest::Approx(values.back() * 1e-2).epsilon(1e-12));
    CHECK(f(0.0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK_THROWS_AS(RadialFunction::from_samples({1.0, 0.5}, {1.0, 1.0}, -1.0), ValidationError);
    CHECK_THROWS_AS(RadialFunction::from_samples({1.0, 2.0}, {1.0}, -1.0), ShapeError);
}

TEST_CASE("non-decaying input is rejected") {
    const auto params = make_params(2, 0.5);
    auto f = RadialFunction::sample([](double) { return 1.0; }, log_nodes(0.1, 1.0, 3), 0.0);
    CHECK_THROWS_AS(frac_laplacian_radial(f, params), AccuracyError);
}

TEST_CASE("singular-integral evaluator matches closed forms") {
    for (auto [n, g] : {std::pair{1, 0.25}, {2, 0.5}, {3, 0.5}, {3, 1.0}}) {
        const auto params = make_params(n, g);
        const double a = 0.5 * params.bubble_decay();
        ScalarField bubble = [a](const PointN& x) { return std::pow(1.0 + x.squaredNorm(), -a); };
        for (double r : {0.0, 0.3, 2.0}) {
            PointN x = PointN::Zero(n);
            x[0] = r;
            const double value = frac_laplacian_pv(bubble, x, params);
            CHECK(value == doctest::Approx(bubble_image(r, n, g)).epsilon(2e-7));
        }
    }
}

TEST_CASE("singular-integral constant") {
    // n = 1, gamma = 1/2: C = 1/pi.
    CHECK(pv_constant(1, 0.5) == doctest::Approx(1.0 / M_PI).epsilon(1e-14));
}

TEST_CASE("sphere multipliers") {
    const auto params = make_params(3, 1.0);
    CHECK(sphere_multiplier(0, params) == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(sphere_multiplier(1, params) == doctest::Approx(15.0 / 4.0).epsilon(1e-14));
    CHECK_THROWS_AS(sphere_multiplier(-1, params), ValidationError);
    // Degree one over degree zero is the critical exponent.
    for (auto [n, g] : {std::pair{1, 0.25}, {2, 0.5}, {3, 0.7}}) {
        const auto pp = make_params(n, g);
        CHECK(sphere_multiplier(1, pp) / sphere_multiplier(0, pp) == doctest::Approx(pp.p).epsilon(1e-13));
    }
}

TEST_CASE("stereographic maps are inverse and land on the unit sphere") {
    for (int n = 1; n <= 3; ++n) {
        PointN x(n);
        for (int i = 0; i < n; ++i) x[i] = 0.3 * (i + 1) - 0.5;
        const PointN zeta = plane_to_sphere(x);
        CHECK(zeta.norm() == doctest::Approx(1.0).epsilon(1e-15));
        CHECK((sphere_to_plane(zeta) - x).norm() < 1e-14);
    }
    PointN north = PointN::Zero(3);
    north[2] = 1.0;
    CHECK_THROWS_AS(sphere_to_plane(north), DomainError);
    const auto params = make_params(2, 0.5);
    CHECK(conformal_weight(PointN::Zero(2), params) == doctest::Approx(std::pow(2.0, 0.5)));
}
