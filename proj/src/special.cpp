#include "qgamma/special.hpp"

#include <array>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>

namespace qgamma::special {

using std::numbers::pi;

std::complex<double> log_gamma(std::complex<double> z) {
    // Shift up until Stirling's series converges to double precision.
    std::complex<double> shift{0.0, 0.0};
    while (std::abs(z) < 16.0) {
        shift += std::log(z);
        z += 1.0;
    }
    // B_{2k} / (2k (2k-1)), k = 1..8
    static constexpr std::array<double, 8> coeff = {
        1.0 / 12.0,        -1.0 / 360.0,      1.0 / 1260.0,        -1.0 / 1680.0,
        1.0 / 1188.0,      -691.0 / 360360.0, 1.0 / 156.0,         -3617.0 / 122400.0};
    const std::complex<double> inv = 1.0 / z;
    const std::complex<double> inv2 = inv * inv;
    std::complex<double> series{0.0, 0.0};
    std::complex<double> power = inv;
    for (double c : coeff) {
        series += c * power;
        power *= inv2;
    }
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    return (z - 0.5) * std::log(z) - z + half_log_2pi + series - shift;
}

double gamma_ratio(double a, double b) { return std::exp(std::lgamma(a) - std::lgamma(b)); }

double sphere_area(int d) {
    return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
}

double beta(double a, double b) {
    return std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
}

namespace {

using Rule = boost::math::quadrature::gauss_kronrod<double, 31>;

double refine(const std::function<double(double)>& f, double a, double b, double estimate,
              double error, double abs_tol, int depth) {
    if (depth <= 0 || error <= abs_tol) return estimate;
    const double mid = 0.5 * (a + b);
    double e_left = 0.0, e_right = 0.0;
    const double left = Rule::integrate(f, a, mid, 0, 0.0, &e_left);
    const double right = Rule::integrate(f, mid, b, 0, 0.0, &e_right);
    return refine(f, a, mid, left, e_left, 0.5 * abs_tol, depth - 1) +
           refine(f, mid, b, right, e_right, 0.5 * abs_tol, depth - 1);
}

}  // namespace

double integrate_gk(const std::function<double(double)>& f, double a, double b, double tol,
                    int max_depth) {
    if (a == b) return 0.0;
    double error = 0.0, l1 = 0.0;
    const double estimate = Rule::integrate(f, a, b, 0, 0.0, &error, &l1);
    const double abs_tol = tol * std::max(l1, std::numeric_limits<double>::min());
    return refine(f, a, b, estimate, error, abs_tol, max_depth);
}

void gauss_legendre(int count, std::vector<double>& x, std::vector<double>& w) {
    x.assign(count, 0.0);
    w.assign(count, 0.0);
    for (int i = 0; i < count; ++i) {
        double z = std::cos(pi * (i + 0.75) / (count + 0.5));
        double derivative = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int k = 1; k <= count; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
            }
            derivative = count * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / derivative;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * derivative * derivative);
    }
}


void sphere_rule(int n, int circle_nodes, int polar_nodes, int azimuth_nodes, std::vector<PointN>& dirs,
                 std::vector<double>& weights) {
    dirs.clear();
    weights.clear();
    if (n == 1) {
        dirs = {PointN::Constant(1, 1.0), PointN::Constant(1, -1.0)};
        weights = {1.0, 1.0};
    } else if (n == 2) {
        const int m = circle_nodes;
        for (int j = 0; j < m; ++j) {
            const double phi = 2.0 * pi * (j + 0.5) / m;
            PointN w(2);
            w << std::cos(phi), std::sin(phi);
            dirs.push_back(w);
            weights.push_back(2.0 * pi / m);
        }
    } else {
        std::vector<double> gx, gw;
        gauss_legendre(polar_nodes, gx, gw);
        const int m = azimuth_nodes;
        for (std::size_t i = 0; i < gx.size(); ++i) {
            const double s = std::sqrt(1.0 - gx[i] * gx[i]);
            for (int j = 0; j < m; ++j) {
                const double phi = 2.0 * pi * (j + 0.5) / m;
                PointN w(3);
                w << s * std::cos(phi), s * std::sin(phi), gx[i];
                dirs.push_back(w);
                weights.push_back(gw[i] * 2.0 * pi / m);
            }
        }
    }
}

}  // namespace qgamma::special
