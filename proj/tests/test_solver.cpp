#include <cmath>
#include <random>

#include "doctest.h"
#include "qgamma/errors.hpp"
#include "qgamma/solver.hpp"

using namespace qgamma;

namespace {

const ProblemParams& line() {
    static const ProblemParams p = make_params(1, 0.25);
    return p;
}

Eigen::VectorXd band_limited(const SphereBasis& basis, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Eigen::VectorXd d(static_cast<Eigen::Index>(basis.size()));
    for (Eigen::Index k = 0; k < d.size(); ++k) d[k] = g(rng) / (1.0 + basis.degrees()[static_cast<std::size_t>(k)]);
    return d / d.norm();
}

// The zero of the reduced gradient for the two-bump fixture, found from a seed.
Bubble two_bump_seed(const ProblemParams& params) {
    const auto K = builtin_curvature("two_bump", params.n);
    const ReducedFunctional rf(K, params, ReducedQuadrature{1e-9, 11, 48, 16, 32, false});
    Box box;
    box.lower = Eigen::VectorXd::Constant(params.n + 1, -4.0);
    box.upper = Eigen::VectorXd::Constant(params.n + 1, 4.0);
    box.lower[0] = 0.05;
    PointN s = PointN::Zero(params.n + 1);
    s[0] = 0.6;
    const auto zeros = reduced_zeros(rf, box, {s});
    REQUIRE(!zeros.empty());
    return zeros.front();
}

}  // namespace

TEST_CASE("energy is flat along the bubble family at eps = 0") {
    for (const auto& params : {line(), make_params(2, 0.5)}) {
        const auto basis = make_basis(params.n, params.n == 1 ? 64 : 32);
        const auto K = builtin_curvature("gaussian", params.n);
        const double e0 = energy(lift_bubble(standard_bubble(params), basis), 0.0, K, params);
        PointN xi = PointN::Zero(params.n);
        xi[0] = 0.3;
        for (double mu : {0.7, 1.0, 1.4}) {
            const double e = energy(lift_bubble(make_bubble(params, mu, xi), basis), 0.0, K, params);
            CHECK(std::abs(e / e0 - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("energy of a nonpositive field is purely quadratic") {
    const auto basis = make_basis(1, 32);
    const auto K = builtin_curvature("gaussian", 1);
    SphereField u = lift_bubble(standard_bubble(line()), basis);
    u.coeffs = -u.coeffs;
    const double q = 0.5 * u.coeffs.dot(basis->multipliers(line()).cwiseProduct(u.coeffs));
    CHECK(energy(u, 0.3, K, line()) == doctest::Approx(q).epsilon(1e-14));
}

TEST_CASE("energy derivative along the dilation tangent vanishes") {
    const auto basis = make_basis(1, 64);
    const auto K = builtin_curvature("gaussian", 1);
    const Bubble z0 = standard_bubble(line());
    const double h = 1e-4;
    Bubble up = z0, down = z0;
    up.mu += h;
    down.mu -= h;
    const double d = (energy(lift_bubble(up, basis), 0.0, K, line()) - energy(lift_bubble(down, basis), 0.0, K, line())) /
                     (2.0 * h);
    CHECK(std::abs(d) <= 1e-6);
}

TEST_CASE("gradient matches finite differences of the energy") {
    for (const auto& params : {line(), make_params(2, 0.5)}) {
        const auto basis = make_basis(params.n, params.n == 1 ? 48 : 16);
        const auto K = builtin_curvature("two_bump", params.n);
        SphereField u = lift_bubble(make_bubble(params, 0.8, PointN::Constant(params.n, 0.2)), basis);
        std::mt19937_64 rng(7);
        u.coeffs += 0.05 * band_limited(*basis, rng);
        const double eps = 0.1;
        const SphereField g = energy_gradient(u, eps, K, params);
        for (int trial = 0; trial < 10; ++trial) {
            const Eigen::VectorXd d = band_limited(*basis, rng);
            const double h = 1e-5;
            SphereField a = u, b = u;
            a.coeffs += h * d;
            b.coeffs -= h * d;
            const double fd = (energy(a, eps, K, params) - energy(b, eps, K, params)) / (2.0 * h);
            const double an = g.coeffs.dot(d);
            CHECK(std::abs(fd - an) <= 1e-6 * std::max(1.0, std::abs(an)));
        }
    }
}

TEST_CASE("gradient at a lifted exact bubble is at the discretization floor") {
    for (const auto& params : {line(), make_params(2, 0.5)}) {
        const auto basis = make_basis(params.n);
        const auto K = builtin_curvature("two_bump", params.n);
        PointN xi = PointN::Zero(params.n);
        xi[0] = -0.2;
        const auto g = energy_gradient(lift_bubble(make_bubble(params, 0.9, xi), basis), 0.0, K, params);
        CHECK(g.coeffs.norm() <= 1e-7);
    }
}

TEST_CASE("gradient splits into linear and p-homogeneous parts") {
    const auto basis = make_basis(1, 32);
    const auto K = builtin_curvature("gaussian", 1);
    const SphereField u = lift_bubble(make_bubble(line(), 1.3, PointN::Constant(1, 0.4)), basis);
    SphereField two = u;
    two.coeffs *= 2.0;
    const Eigen::VectorXd lin = basis->multipliers(line()).cwiseProduct(u.coeffs);
    const Eigen::VectorXd nonlin = lin - energy_gradient(u, 0.0, K, line()).coeffs;
    const Eigen::VectorXd expected = 2.0 * lin - std::pow(2.0, line().p) * nonlin;
    CHECK((energy_gradient(two, 0.0, K, line()).coeffs - expected).norm() <= 1e-12 * expected.norm());
}

TEST_CASE("eps = 0 from the exact bubble is accepted immediately") {
    const auto K = builtin_curvature("two_bump", 1);
    const auto basis = make_basis(1);
    const Bubble b = make_bubble(line(), 0.8, PointN::Constant(1, 0.1));
    const auto rec = solve_newton(lift_bubble(b, basis), 0.0, K, line(), {}, b);
    CHECK(rec.newton_iters <= 2);
    CHECK(rec.distance_to_Z <= 1e-8);
    CHECK(rec.nearest_bubble.mu == doctest::Approx(0.8).epsilon(1e-8));
    // Exactly n + 1 near-zero eigenvalues at eps = 0.
    REQUIRE(rec.near_kernel.size() == 2);
    CHECK(rec.near_kernel[1] < 1e-8);
    CHECK(rec.kernel_gap > 1e-2);
}

TEST_CASE("two-bump solve at eps = 0.02 on the line") {
    const auto K = builtin_curvature("two_bump", 1);
    const Bubble seed = two_bump_seed(line());
    const auto basis = make_basis(1);
    const auto rec = solve_newton(lift_bubble(seed, basis), 0.02, K, line(), {}, seed);
    CHECK(rec.residual_L2 <= 1e-9);
    CHECK(rec.residual_fine <= 1e-8);
    CHECK(rec.positivity_margin > 0.0);
    CHECK(rec.distance_to_Z > 0.0);
    CHECK(rec.distance_to_Z < 0.02);
    CHECK(rec.gradient_check < 1e-6);
    // Decay at infinity, |x|^{-(n - 2 gamma)}.
    CHECK(std::abs(rec.decay_slope + line().bubble_decay()) < 0.1);
    // The former kernel opens up to O(eps) and no other eigenvalue comes near zero.
    CHECK(rec.near_kernel[0] > 1e-8);
    CHECK(rec.kernel_gap > 1e-2);

    const auto riesz = riesz_residual(rec.field, 0.02, K, line());
    CHECK(riesz.available);
    CHECK(riesz.residual <= 5e-4);

    // Doubling the degree moves the distance by less than 10%.
    const auto fine = make_basis(1, 128);
    const auto rec2 = solve_newton(lift_bubble(seed, fine), 0.02, K, line(), {}, seed);
    CHECK(std::abs(rec2.distance_to_Z - rec.distance_to_Z) < 0.1 * rec.distance_to_Z);

    const auto j = to_json(rec);
    CHECK(j["newton_iters"] == rec.newton_iters);
    CHECK(j["nearest_bubble"]["xi"].size() == 1);
}

TEST_CASE("large eps gives an error or a genuine solution") {
    const auto K = builtin_curvature("two_bump", 1);
    const Bubble seed = standard_bubble(line());
    const auto basis = make_basis(1);
    SolverOptions opt;
    opt.max_iterations = 15;
    try {
        const auto rec = solve_newton(lift_bubble(seed, basis), 10.0, K, line(), opt, seed);
        CHECK(rec.residual_L2 <= 1e-9);
        CHECK(rec.positivity_margin > 0.0);
    } catch (const ConvergenceError&) {
        CHECK(true);
    } catch (const PositivityError& e) {
        CHECK(e.min_value() <= 0.0);
    }
}

TEST_CASE("sphere constant check") {
    for (const auto& params : {line(), make_params(2, 0.5)}) {
        const auto c = sphere_constant_check(params);
        CHECK(c.max_deviation <= 1e-10);
        CHECK(std::abs(c.Lambda_implied / c.Lambda_bubble - 1.0) <= 1e-6);
    }
}

TEST_CASE("Riesz representation of the bubble and of zero") {
    for (const auto& params : {line(), make_params(2, 0.5)}) {
        const auto basis = make_basis(params.n, 24);
        const auto K = builtin_curvature("gaussian", params.n);
        PointN xi = PointN::Zero(params.n);
        xi[0] = 0.5;
        const auto z = lift_bubble(make_bubble(params, 0.7, xi), basis);
        const auto r = riesz_residual(z, 0.0, K, params);
        CHECK(r.available);
        CHECK(r.residual <= 1e-4);
        SphereField zero = z;
        zero.coeffs.setZero();
        CHECK(riesz_residual(zero, 0.0, K, params).residual == 0.0);
    }
}

TEST_CASE("eps sweep is linear in eps") {
    const auto K = builtin_curvature("two_bump", 1);
    const auto sweep = continuation_sweep(K, line(), {0.0, 0.005, 0.01, 0.02, 0.04}, two_bump_seed(line()));
    REQUIRE(sweep.rows.size() == 5);
    for (const auto& row : sweep.rows) REQUIRE(row.record.has_value());
    CHECK(sweep.rows[0].record->distance_to_Z <= 1e-8);
    CHECK(sweep.fitted == 4);
    CHECK(sweep.slope >= 0.85);
    CHECK(sweep.slope <= 1.15);
    CHECK(sweep.monotone);
    CHECK_THROWS_AS(continuation_sweep(K, line(), {0.02, 0.01}, two_bump_seed(line())), ValidationError);
}

TEST_CASE("field CSV has one row per node") {
    const auto basis = make_basis(1, 8);
    const auto csv = field_csv(lift_bubble(standard_bubble(line()), basis));
    CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == basis->node_count() + 1);
    CHECK(csv.rfind("z1,z2,value\n", 0) == 0);
}
