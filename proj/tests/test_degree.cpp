#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "qgamma/curvature.hpp"
#include "qgamma/degree.hpp"
#include "qgamma/errors.hpp"

using namespace qgamma;

namespace {

Box cube(int d, double half) { return {PointN::Constant(d, -half), PointN::Constant(d, half)}; }

MapUnderTest linear_map(const MatrixN& A) {
    return {static_cast<int>(A.rows()), [A](const PointN& x) { return PointN(A * x); }, std::nullopt};
}

MapUnderTest gradient_map(const CurvatureField& k) {
    return {k.n, [k](const PointN& x) { return k.gradient(x); }, std::nullopt};
}

// Winding number of a planar map around the boundary of a box, by summing
// the wrapped angle increments over a dense polygon.
int winding_number(const MapUnderTest& m, const Box& box, int per_side) {
    std::vector<PointN> path;
    const double x0 = box.lower[0], x1 = box.upper[0], y0 = box.lower[1], y1 = box.upper[1];
    for (int i = 0; i < per_side; ++i) path.push_back((PointN(2) << x0 + (x1 - x0) * i / per_side, y0).finished());
    for (int i = 0; i < per_side; ++i) path.push_back((PointN(2) << x1, y0 + (y1 - y0) * i / per_side).finished());
    for (int i = 0; i < per_side; ++i) path.push_back((PointN(2) << x1 - (x1 - x0) * i / per_side, y1).finished());
    for (int i = 0; i < per_side; ++i) path.push_back((PointN(2) << x0, y1 - (y1 - y0) * i / per_side).finished());
    double total = 0.0;
    for (std::size_t i = 0; i < path.size(); ++i) {
        const PointN a = m.eval(path[i]), b = m.eval(path[(i + 1) % path.size()]);
        double da = std::atan2(b[1], b[0]) - std::atan2(a[1], a[0]);
        while (da > std::numbers::pi) da -= 2 * std::numbers::pi;
        while (da < -std::numbers::pi) da += 2 * std::numbers::pi;
        total += da;
    }
    return static_cast<int>(std::lround(total / (2 * std::numbers::pi)));
}

}  // namespace

TEST_CASE("identity and antipodal maps") {
    for (int d = 1; d <= 4; ++d) {
        CAPTURE(d);
        const MatrixN I = MatrixN::Identity(d, d);
        const auto id = brouwer_degree(linear_map(I), cube(d, 1.0));
        CHECK(id.degree == 1);
        CHECK(id.certified);
        CHECK(id.routes_agree);
        const int expected = d % 2 == 0 ? 1 : -1;
        const auto anti_box = brouwer_degree(linear_map(-I), cube(d, 1.0));
        CHECK(anti_box.degree == expected);
        CHECK(anti_box.routes_agree);
        REQUIRE(anti_box.integral_estimate.has_value());
        CHECK(*anti_box.integral_estimate == doctest::Approx(expected).epsilon(0.05));
        const auto anti_ball = ball_degree(linear_map(-I), PointN::Zero(d), 1.0);
        CHECK(anti_ball.degree == expected);
        CHECK(anti_ball.routes_agree);
    }
}

TEST_CASE("planar squaring map has degree 2") {
    MapUnderTest sq{2, [](const PointN& x) {
                        PointN f(2);
                        f << x[0] * x[0] - x[1] * x[1], 2 * x[0] * x[1];
                        return f;
                    },
                    std::nullopt};
    const Box box = cube(2, 1.5);
    const int oracle = winding_number(sq, box, 4000);
    REQUIRE(oracle == 2);
    const auto r = brouwer_degree(sq, box);
    CHECK(r.degree == oracle);
    CHECK(r.routes_agree);
    // z^3 on an off-centre box that still contains the origin.
    MapUnderTest cube_map{2, [](const PointN& x) {
                              const std::complex<double> z(x[0], x[1]);
                              const auto w = z * z * z;
                              PointN f(2);
                              f << w.real(), w.imag();
                              return f;
                          },
                          std::nullopt};
    const Box off{(PointN(2) << -0.7, -1.1).finished(), (PointN(2) << 1.3, 0.4).finished()};
    CHECK(brouwer_degree(cube_map, off).degree == winding_number(cube_map, off, 4000));
}

TEST_CASE("linear maps: degree is the sign of the determinant") {
    std::mt19937 rng(7);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 24; ++trial) {
        const int d = 1 + trial % 4;
        MatrixN A(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) A(i, j) = g(rng);
        if (std::abs(A.determinant()) < 0.05) continue;
        CAPTURE(trial);
        DegreeOptions opt;
        opt.cross_check = false;
        const auto r = brouwer_degree(linear_map(A), cube(d, 1.0), opt);
        CHECK(r.degree == (A.determinant() > 0 ? 1 : -1));
        // Box that misses the zero.
        Box away = cube(d, 0.4);
        away.lower[0] += 1.0;
        away.upper[0] += 1.0;
        CHECK(brouwer_degree(linear_map(A), away, opt).degree == 0);
    }
}

TEST_CASE("inward shortcut reproduced from raw evaluations") {
    for (int d = 1; d <= 4; ++d) {
        CAPTURE(d);
        // Inward but non-radial field: -x plus a bounded rotation-like term.
        MapUnderTest m{d, [d](const PointN& x) {
                           PointN f = -x;
                           for (int i = 0; i + 1 < d; ++i) f[i] += 0.3 * std::sin(x[i + 1]);
                           return f;
                       },
                       std::nullopt};
        const auto fast = inward_shortcut(m, PointN::Zero(d), 2.0);
        REQUIRE(fast.has_value());
        DegreeOptions opt;
        opt.cross_check = d <= 3;
        const auto slow = ball_degree(m, PointN::Zero(d), 2.0, opt);
        CHECK(slow.degree == *fast);
        CHECK(slow.degree == (d % 2 == 0 ? 1 : -1));
        CHECK(slow.routes_agree);
    }
    // Outward field: shortcut declines.
    CHECK_FALSE(inward_shortcut(linear_map(MatrixN::Identity(2, 2)), PointN::Zero(2), 1.0).has_value());
}

TEST_CASE("boundary zero is reported") {
    const auto m = linear_map(MatrixN::Identity(2, 2));
    Box touching{(PointN(2) << 0.0, -1.0).finished(), (PointN(2) << 1.0, 1.0).finished()};
    CHECK_THROWS_AS(brouwer_degree(m, touching), DegreeError);
    CHECK_THROWS_AS(brouwer_degree(m, Box{PointN::Zero(3), PointN::Ones(3)}), ShapeError);
}

TEST_CASE("local degrees of maxima and saddles") {
    MatrixN H(2, 2);
    H << -2.0, 0.3, 0.3, -1.0;
    CHECK(local_degree(linear_map(H), PointN::Zero(2), 0.1) == 1);
    H << -2.0, 0.0, 0.0, 1.0;
    CHECK(local_degree(linear_map(H), PointN::Zero(2), 0.1) == -1);
    // Nondegenerate zeros: local degree equals sign det of the Jacobian.
    const auto k = builtin_curvature("two_bump", 2);
    const auto m = gradient_map(k);
    const auto found = crit_points(m, cube(2, 3.0));
    for (const auto& cp : found.points) {
        CHECK(cp.local_degree == (cp.jacobian_det > 0 ? 1 : -1));
        const MatrixN hess = k.hessian_at(cp.x);
        CHECK(cp.local_degree == (hess.determinant() > 0 ? 1 : -1));
    }
}

TEST_CASE("critical points of the built-in library") {
    // Gaussian bump shifted to a.
    const auto base = builtin_curvature("gaussian", 2);
    const PointN a = (PointN(2) << 0.4, -0.7).finished();
    MapUnderTest shifted{2, [base, a](const PointN& x) { return base.gradient(PointN(x - a)); }, std::nullopt};
    const Box box = cube(2, 2.0);
    const auto g = crit_points(shifted, box, grid_seeds(box, 5));
    REQUIRE(g.points.size() == 1);
    CHECK((g.points[0].x - a).norm() < 1e-9);
    CHECK(g.points[0].residual <= 1e-10);
    CHECK(g.points[0].local_degree == 1);

    // Two bumps: sign scan of dK/dx1 along the axis (dK/dx2 vanishes there
    // by symmetry), and no sign-change cell for both components off the axis.
    const auto k = builtin_curvature("two_bump", 2);
    int axis_roots = 0;
    double prev = k.gradient((PointN(2) << -3.0, 0.0).finished())[0];
    for (int i = 1; i <= 6001; ++i) {
        const double t = -3.0 + 6.0 * i / 6001.0;
        const double cur = k.gradient((PointN(2) << t, 0.0).finished())[0];
        if ((cur > 0) != (prev > 0)) ++axis_roots;
        prev = cur;
    }
    int off_axis = 0;
    const int M = 120;
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j) {
            const double x = -3.0 + 6.0 * (i + 0.5) / M, y = 0.1 + 2.9 * j / M, hy = 2.9 / M, hx = 6.0 / M;
            bool change[2] = {false, false};
            const PointN g0 = k.gradient((PointN(2) << x, y).finished());
            for (int c = 1; c < 4; ++c) {
                const PointN gc = k.gradient((PointN(2) << x + hx * (c & 1), y + hy * (c >> 1)).finished());
                for (int q = 0; q < 2; ++q) change[q] = change[q] || ((gc[q] > 0) != (g0[q] > 0));
            }
            if (change[0] && change[1]) ++off_axis;
        }
    REQUIRE(axis_roots == 3);
    REQUIRE(off_axis == 0);
    const Box big = cube(2, 3.0);
    const auto two = crit_points(gradient_map(k), big);
    REQUIRE(two.points.size() == 3);
    int maxima = 0, saddles = 0;
    for (const auto& cp : two.points) {
        CHECK(std::abs(cp.x[1]) < 1e-9);
        CHECK(cp.residual <= 1e-10);
        (k.hessian_at(cp.x).trace() < 0 && cp.local_degree == 1 ? maxima : saddles)++;
    }
    CHECK(maxima == 2);
    CHECK(saddles == 1);

    // Constant: no isolated zeros, diagnostics instead of an error.
    const auto flat = crit_points(gradient_map(builtin_curvature("constant", 2)), big);
    CHECK(flat.points.empty());
    CHECK_FALSE(flat.diagnostics.empty());
}

TEST_CASE("degree sum over zeros and excision") {
    for (const char* name : {"gaussian", "rational", "two_bump"}) {
        for (int n : {1, 2, 3}) {
            CAPTURE(name);
            CAPTURE(n);
            const auto k = builtin_curvature(name, n);
            const auto m = gradient_map(k);
            const Box box = cube(n, 2.0);
            DegreeOptions opt;
            opt.cross_check = n <= 2;
            const auto total = brouwer_degree(m, box, opt);
            CHECK(total.routes_agree);
            const auto found = crit_points(m, box);
            int sum = 0;
            for (const auto& cp : found.points) sum += cp.local_degree;
            CHECK(sum == total.degree);
            // Inward on the boundary: degree (-1)^n.
            CHECK(total.degree == (n % 2 == 0 ? 1 : -1));
            // Enlarging the box crosses no zeros.
            opt.cross_check = false;
            CHECK(brouwer_degree(m, cube(n, 2.3), opt).degree == total.degree);
            Box lopsided = box;
            lopsided.upper[0] = 2.6;
            CHECK(brouwer_degree(m, lopsided, opt).degree == total.degree);
        }
    }
}
