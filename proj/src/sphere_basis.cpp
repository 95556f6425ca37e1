#include "qgamma/sphere_basis.hpp"

#include <cmath>
#include <numbers>

#include "qgamma/errors.hpp"
#include "qgamma/parallel.hpp"
#include "qgamma/special.hpp"

namespace qgamma {

using std::numbers::pi;

SphereBasis::SphereBasis(int n, int L, int oversample) : n_(n), L_(L) {
    if (n != 1 && n != 2) throw ValidationError("SphereBasis: spectral solves support n = 1 or 2");
    if (L < 1) throw ValidationError("SphereBasis: truncation degree L must be >= 1");
    if (oversample < 1) throw ValidationError("SphereBasis: oversample must be >= 1");
    if (n == 1) {
        build_circle(oversample);
    } else {
        build_sphere(oversample);
    }
}

void SphereBasis::build_circle(int oversample) {
    degrees_.push_back(0);
    for (int l = 1; l <= L_; ++l) {
        degrees_.push_back(l);
        degrees_.push_back(l);
    }
    // Multiple of 4 with half-step offset keeps phi = pi/2 (the north pole) off the grid.
    int count = oversample * (2 * L_ + 2);
    count = 4 * ((count + 3) / 4);
    nodes_.resize(count);
    weights_ = Eigen::VectorXd::Constant(count, 2.0 * pi / count);
    circle_synthesis_.resize(count, static_cast<Eigen::Index>(degrees_.size()));
    for (int j = 0; j < count; ++j) {
        const double phi = 2.0 * pi * (j + 0.5) / count;
        PointN zeta(2);
        zeta << std::cos(phi), std::sin(phi);
        nodes_[j] = zeta;
        circle_synthesis_(j, 0) = 1.0 / std::sqrt(2.0 * pi);
        for (int l = 1; l <= L_; ++l) {
            circle_synthesis_(j, 2 * l - 1) = std::cos(l * phi) / std::sqrt(pi);
            circle_synthesis_(j, 2 * l) = std::sin(l * phi) / std::sqrt(pi);
        }
    }
}

void SphereBasis::build_sphere(int oversample) {
    for (int l = 0; l <= L_; ++l) {
        for (int k = 0; k < 2 * l + 1; ++k) degrees_.push_back(l);
    }
    rings_ = oversample * (L_ + 1);
    ring_points_ = 2 * rings_;
    std::vector<double> gx, gw;
    special::gauss_legendre(rings_, gx, gw);
    ring_weights_.resize(rings_);
    const std::size_t table = static_cast<std::size_t>((L_ + 1) * (L_ + 2) / 2);
    ring_legendre_.resize(table * rings_);
    std::vector<double> row;
    nodes_.reserve(static_cast<std::size_t>(rings_) * ring_points_);
    weights_.resize(static_cast<Eigen::Index>(rings_) * ring_points_);
    for (int i = 0; i < rings_; ++i) {
        ring_weights_[i] = gw[i];
        const double x = gx[i];
        const double s = std::sqrt(std::max(0.0, 1.0 - x * x));
        legendre(x, s, row);
        std::copy(row.begin(), row.end(), ring_legendre_.begin() + static_cast<std::ptrdiff_t>(i * table));
        for (int j = 0; j < ring_points_; ++j) {
            const double phi = 2.0 * pi * j / ring_points_;
            PointN zeta(3);
            zeta << s * std::cos(phi), s * std::sin(phi), x;
            nodes_.push_back(zeta);
            weights_[static_cast<Eigen::Index>(i) * ring_points_ + j] = gw[i] * 2.0 * pi / ring_points_;
        }
    }
    cos_table_.resize(ring_points_, L_ + 1);
    sin_table_.resize(ring_points_, L_ + 1);
    for (int j = 0; j < ring_points_; ++j) {
        const double phi = 2.0 * pi * j / ring_points_;
        for (int m = 0; m <= L_; ++m) {
            cos_table_(j, m) = std::cos(m * phi);
            sin_table_(j, m) = std::sin(m * phi);
        }
    }
}

// Orthonormal associated Legendre functions: 2 pi int Pbar_lm^2 dx = 1.
void SphereBasis::legendre(double x, double sin_t, std::vector<double>& out) const {
    out.assign(static_cast<std::size_t>((L_ + 1) * (L_ + 2) / 2), 0.0);
    double diagonal = 1.0 / std::sqrt(4.0 * pi);
    for (int m = 0; m <= L_; ++m) {
        if (m > 0) diagonal *= -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * sin_t;
        out[legendre_index(m, m)] = diagonal;
        if (m + 1 <= L_) out[legendre_index(m + 1, m)] = std::sqrt(2.0 * m + 3.0) * x * diagonal;
        for (int l = m + 2; l <= L_; ++l) {
            const double ll = static_cast<double>(l) * l, mm = static_cast<double>(m) * m;
            const double a = std::sqrt((4.0 * ll - 1.0) / (ll - mm));
            const double b = std::sqrt(((l - 1.0) * (l - 1.0) - mm) / (4.0 * (l - 1.0) * (l - 1.0) - 1.0));
            out[legendre_index(l, m)] =
                a * (x * out[legendre_index(l - 1, m)] - b * out[legendre_index(l - 2, m)]);
        }
    }
}

Eigen::VectorXd SphereBasis::synthesize(const Eigen::VectorXd& coeffs) const {
    if (static_cast<std::size_t>(coeffs.size()) != size()) throw ShapeError("synthesize: coefficient count mismatch");
    if (n_ == 1) return circle_synthesis_ * coeffs;
    Eigen::VectorXd values(static_cast<Eigen::Index>(node_count()));
    const std::size_t table = static_cast<std::size_t>((L_ + 1) * (L_ + 2) / 2);
    parallel_for(static_cast<std::size_t>(rings_), [&](std::size_t i) {
        const double* leg = ring_legendre_.data() + i * table;
        Eigen::VectorXd cos_part = Eigen::VectorXd::Zero(L_ + 1);
        Eigen::VectorXd sin_part = Eigen::VectorXd::Zero(L_ + 1);
        for (int l = 0; l <= L_; ++l) {
            const Eigen::Index base = static_cast<Eigen::Index>(l) * l;
            cos_part[0] += coeffs[base] * leg[legendre_index(l, 0)];
            for (int m = 1; m <= l; ++m) {
                const double p = std::sqrt(2.0) * leg[legendre_index(l, m)];
                cos_part[m] += coeffs[base + 2 * m - 1] * p;
                sin_part[m] += coeffs[base + 2 * m] * p;
            }
        }
        values.segment(static_cast<Eigen::Index>(i) * ring_points_, ring_points_) =
            cos_table_ * cos_part + sin_table_ * sin_part;
    });
    return values;
}

Eigen::VectorXd SphereBasis::analyze(const Eigen::VectorXd& values) const {
    if (static_cast<std::size_t>(values.size()) != node_count()) throw ShapeError("analyze: node count mismatch");
    if (n_ == 1) return circle_synthesis_.transpose() * weights_.cwiseProduct(values);
    const std::size_t table = static_cast<std::size_t>((L_ + 1) * (L_ + 2) / 2);
    // Ring-wise Fourier sums, then Legendre sums accumulated in ring order.
    Eigen::MatrixXd cos_part(rings_, L_ + 1), sin_part(rings_, L_ + 1);
    parallel_for(static_cast<std::size_t>(rings_), [&](std::size_t i) {
        const auto ring = values.segment(static_cast<Eigen::Index>(i) * ring_points_, ring_points_);
        const double scale = ring_weights_[static_cast<Eigen::Index>(i)] * 2.0 * pi / ring_points_;
        cos_part.row(static_cast<Eigen::Index>(i)) = scale * (cos_table_.transpose() * ring).transpose();
        sin_part.row(static_cast<Eigen::Index>(i)) = scale * (sin_table_.transpose() * ring).transpose();
    });
    Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size()));
    parallel_for(static_cast<std::size_t>(L_ + 1), [&](std::size_t lu) {
        const int l = static_cast<int>(lu);
        const Eigen::Index base = static_cast<Eigen::Index>(l) * l;
        for (int i = 0; i < rings_; ++i) {
            const double* leg = ring_legendre_.data() + static_cast<std::size_t>(i) * table;
            coeffs[base] += leg[legendre_index(l, 0)] * cos_part(i, 0);
            for (int m = 1; m <= l; ++m) {
                const double p = std::sqrt(2.0) * leg[legendre_index(l, m)];
                coeffs[base + 2 * m - 1] += p * cos_part(i, m);
                coeffs[base + 2 * m] += p * sin_part(i, m);
            }
        }
    });
    return coeffs;
}

double SphereBasis::evaluate(const Eigen::VectorXd& coeffs, const PointN& zeta) const {
    if (static_cast<std::size_t>(coeffs.size()) != size()) throw ShapeError("evaluate: coefficient count mismatch");
    if (zeta.size() != n_ + 1) throw ShapeError("evaluate: point must lie in R^{n+1}");
    if (n_ == 1) {
        const double phi = std::atan2(zeta[1], zeta[0]);
        double sum = coeffs[0] / std::sqrt(2.0 * pi);
        for (int l = 1; l <= L_; ++l) {
            sum += (coeffs[2 * l - 1] * std::cos(l * phi) + coeffs[2 * l] * std::sin(l * phi)) / std::sqrt(pi);
        }
        return sum;
    }
    const double phi = std::atan2(zeta[1], zeta[0]);
    std::vector<double> leg;
    legendre(zeta[2], std::hypot(zeta[0], zeta[1]), leg);
    double sum = 0.0;
    for (int l = 0; l <= L_; ++l) {
        const Eigen::Index base = static_cast<Eigen::Index>(l) * l;
        sum += coeffs[base] * leg[legendre_index(l, 0)];
        for (int m = 1; m <= l; ++m) {
            const double p = std::sqrt(2.0) * leg[legendre_index(l, m)];
            sum += p * (coeffs[base + 2 * m - 1] * std::cos(m * phi) + coeffs[base + 2 * m] * std::sin(m * phi));
        }
    }
    return sum;
}

Eigen::VectorXd SphereBasis::multipliers(const ProblemParams& params) const {
    if (params.n != n_) throw ShapeError("multipliers: dimension mismatch");
    std::vector<double> by_degree(static_cast<std::size_t>(L_ + 1));
    for (int l = 0; l <= L_; ++l) by_degree[static_cast<std::size_t>(l)] = sphere_multiplier(l, params);
    Eigen::VectorXd out(static_cast<Eigen::Index>(size()));
    for (std::size_t i = 0; i < size(); ++i) out[static_cast<Eigen::Index>(i)] = by_degree[static_cast<std::size_t>(degrees_[i])];
    return out;
}

SphereField lift_to_sphere(const ScalarField& u, const ProblemParams& params,
                           std::shared_ptr<const SphereBasis> basis) {
    if (basis->dim() != params.n) throw ShapeError("lift_to_sphere: dimension mismatch");
    const auto& nodes = basis->nodes();
    Eigen::VectorXd values(static_cast<Eigen::Index>(nodes.size()));
    parallel_for(nodes.size(), [&](std::size_t i) {
        const PointN x = sphere_to_plane(nodes[i]);
        values[static_cast<Eigen::Index>(i)] = u(x) / conformal_weight(x, params);
    });
    SphereField out;
    out.coeffs = basis->analyze(values);
    out.basis = std::move(basis);
    return out;
}

double pull_to_plane(const SphereField& v, const ProblemParams& params, const PointN& x) {
    return conformal_weight(x, params) * v(plane_to_sphere(x));
}

}  // namespace qgamma
