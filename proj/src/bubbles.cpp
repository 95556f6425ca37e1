#include "qgamma/bubbles.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "qgamma/errors.hpp"
#include "qgamma/parallel.hpp"
#include "qgamma/special.hpp"

namespace qgamma {

BubbleConstant bubble_constant(const ProblemParams& params) {
    static std::mutex mutex;
    static std::map<std::pair<int, double>, BubbleConstant> cache;
    const auto key = std::make_pair(params.n, params.gamma);
    {
        std::lock_guard lock(mutex);
        if (auto it = cache.find(key); it != cache.end()) return it->second;
    }
    const double a = 0.5 * params.bubble_decay();
    auto w = RadialFunction::sample([a](double r) { return std::pow(1.0 + r * r, -a); },
                                    log_nodes(1e-2, 1e2, 41), -2.0 * a);
    const auto image = frac_laplacian_radial(w, params);
    std::vector<double> ratio(w.nodes.size());
    double mean = 0.0;
    for (std::size_t i = 0; i < ratio.size(); ++i) {
        ratio[i] = image.values[i] / std::pow(w.values[i], params.p);
        mean += ratio[i];
    }
    mean /= static_cast<double>(ratio.size());
    double var = 0.0;
    for (double r : ratio) var += (r - mean) * (r - mean);
    const double spread = std::sqrt(var / static_cast<double>(ratio.size())) / std::abs(mean);
    if (spread > 1e-5) {
        throw AccuracyError("bubble_constant: measured ratio is not constant", mean, spread);
    }
    BubbleConstant out;
    out.Lambda = mean;
    out.alpha = std::pow(mean, 1.0 / (params.p - 1.0));
    out.spread = spread;
    out.closed_form = std::pow(2.0, 2.0 * params.gamma) *
                      special::gamma_ratio(0.5 * params.n + params.gamma, 0.5 * params.n - params.gamma);
    std::lock_guard lock(mutex);
    cache.emplace(key, out);
    return out;
}

Bubble make_bubble(const ProblemParams& params, double mu, const PointN& xi) {
    if (!(mu > 0.0)) throw ValidationError("bubble scale mu must be > 0");
    if (xi.size() != params.n) throw ShapeError("bubble center dimension mismatch");
    return Bubble{mu, xi, params};
}

Bubble standard_bubble(const ProblemParams& params) {
    return make_bubble(params, 1.0, PointN::Zero(params.n));
}

double bubble_eval(const Bubble& b, const PointN& x) {
    return bubble_eval_radial(b, (x - b.xi).norm());
}

double bubble_eval_radial(const Bubble& b, double r) {
    const double alpha = bubble_constant(b.params).alpha;
    return alpha * std::pow(b.mu / (b.mu * b.mu + r * r), 0.5 * b.params.bubble_decay());
}

Eigen::VectorXd bubble_tangents(const Bubble& b, const PointN& x) {
    const int n = b.params.n;
    const double a = 0.5 * b.params.bubble_decay();
    const PointN d = x - b.xi;
    const double d2 = d.squaredNorm();
    const double denom = b.mu * b.mu + d2;
    const double z = bubble_eval(b, x);
    Eigen::VectorXd out(n + 1);
    out[0] = a * z * (d2 - b.mu * b.mu) / (b.mu * denom);
    for (int i = 0; i < n; ++i) out[i + 1] = a * z * 2.0 * d[i] / denom;
    return out;
}

namespace {

double lifted_denominator(const Bubble& b, const PointN& zeta) {
    const int n = b.params.n;
    const double s = 1.0 - zeta[n];
    return s * (b.mu * b.mu + b.xi.squaredNorm() - 1.0) + 2.0 - 2.0 * zeta.head(n).dot(b.xi);
}

}  // namespace

double lifted_bubble(const Bubble& b, const PointN& zeta) {
    if (zeta.size() != b.params.n + 1) throw ShapeError("lifted_bubble: point must lie in R^{n+1}");
    const double alpha = bubble_constant(b.params).alpha;
    return alpha * std::pow(b.mu / lifted_denominator(b, zeta), 0.5 * b.params.bubble_decay());
}

Eigen::VectorXd lifted_tangents(const Bubble& b, const PointN& zeta) {
    const int n = b.params.n;
    const double a = 0.5 * b.params.bubble_decay();
    const double s = 1.0 - zeta[n];
    const double D = lifted_denominator(b, zeta);
    const double v = lifted_bubble(b, zeta);
    Eigen::VectorXd out(n + 1);
    out[0] = v * (a / b.mu - 2.0 * a * b.mu * s / D);
    for (int i = 0; i < n; ++i) out[i + 1] = -a * v * (2.0 * s * b.xi[i] - 2.0 * zeta[i]) / D;
    return out;
}

SphereField lift_bubble(const Bubble& b, std::shared_ptr<const SphereBasis> basis) {
    const auto& nodes = basis->nodes();
    Eigen::VectorXd values(static_cast<Eigen::Index>(nodes.size()));
    for (std::size_t i = 0; i < nodes.size(); ++i) values[static_cast<Eigen::Index>(i)] = lifted_bubble(b, nodes[i]);
    SphereField out;
    out.coeffs = basis->analyze(values);
    out.basis = std::move(basis);
    return out;
}

Eigen::MatrixXd lifted_tangent_coeffs(const Bubble& b, const SphereBasis& basis) {
    const int k = b.params.n + 1;
    const auto& nodes = basis.nodes();
    Eigen::MatrixXd values(static_cast<Eigen::Index>(nodes.size()), k);
    for (std::size_t i = 0; i < nodes.size(); ++i) values.row(static_cast<Eigen::Index>(i)) = lifted_tangents(b, nodes[i]).transpose();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(basis.size()), k);
    for (int j = 0; j < k; ++j) out.col(j) = basis.analyze(values.col(j));
    return out;
}

LinearizedOperator linearized_operator(const Bubble& b, int L) {
    LinearizedOperator op;
    op.bubble = b;
    op.basis = std::make_shared<const SphereBasis>(b.params.n, L);
    const SphereBasis& basis = *op.basis;
    const std::size_t size = basis.size();
    const auto& nodes = basis.nodes();
    Eigen::VectorXd v(static_cast<Eigen::Index>(nodes.size()));
    for (std::size_t i = 0; i < nodes.size(); ++i) v[static_cast<Eigen::Index>(i)] = lifted_bubble(b, nodes[i]);

    const Eigen::VectorXd coeffs = basis.analyze(v);
    double top = 0.0, tail = 0.0;
    for (std::size_t i = 0; i < size; ++i) {
        const double c = std::abs(coeffs[static_cast<Eigen::Index>(i)]);
        top = std::max(top, c);
        if (basis.degrees()[i] == L) tail = std::max(tail, c);
    }
    op.spectral_tail = tail / top;
    op.tail_warning = op.spectral_tail > 1e-8;

    const double p = b.params.p;
    const Eigen::VectorXd potential = p * v.array().pow(p - 1.0).matrix();
    const Eigen::VectorXd lambda = basis.multipliers(b.params);
    op.matrix.resize(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(size));
    parallel_for(size, [&](std::size_t j) {
        Eigen::VectorXd unit = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size));
        unit[static_cast<Eigen::Index>(j)] = 1.0;
        const Eigen::VectorXd column = -basis.analyze(potential.cwiseProduct(basis.synthesize(unit)));
        op.matrix.col(static_cast<Eigen::Index>(j)) = column;
        op.matrix(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) += lambda[static_cast<Eigen::Index>(j)];
    });
    const double asymmetry = (op.matrix - op.matrix.transpose()).norm() / op.matrix.norm();
    if (asymmetry > 1e-10) {
        throw AccuracyError("linearized_operator: assembled matrix is not symmetric", asymmetry, asymmetry);
    }
    op.matrix = 0.5 * (op.matrix + op.matrix.transpose()).eval();
    return op;
}

KernelReport kernel_check(const LinearizedOperator& op, double relative_threshold) {
    KernelReport report;
    const int k = op.bubble.params.n + 1;
    report.expected_dim = k;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(op.matrix);
    const Eigen::VectorXd& values = eig.eigenvalues();
    const double norm = values.cwiseAbs().maxCoeff();
    report.threshold = relative_threshold * norm;

    std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
    for (Eigen::Index i = 0; i < values.size(); ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return std::abs(values[a]) < std::abs(values[b]); });
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (std::abs(values[i]) < report.threshold) {
            ++report.dim;
        } else if (values[i] < 0.0) {
            ++report.negatives;
        }
    }
    for (std::size_t i = 0; i < std::min<std::size_t>(order.size(), static_cast<std::size_t>(k + 2)); ++i) {
        report.smallest.push_back(std::abs(values[order[i]]));
    }
    if (static_cast<int>(order.size()) > k) {
        report.gap_ratio = std::abs(values[order[static_cast<std::size_t>(k)]]) /
                           std::max(std::abs(values[order[static_cast<std::size_t>(k - 1)]]),
                                    std::numeric_limits<double>::min());
    }

    // Principal angles between the k smallest eigenvectors and the tangent span.
    Eigen::MatrixXd kernel(op.matrix.rows(), k);
    for (int j = 0; j < k; ++j) kernel.col(j) = eig.eigenvectors().col(order[static_cast<std::size_t>(j)]);
    const Eigen::MatrixXd tangents = lifted_tangent_coeffs(op.bubble, *op.basis);
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(tangents).householderQ() *
                              Eigen::MatrixXd::Identity(tangents.rows(), k);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(kernel.transpose() * q);
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
        report.angles.push_back(std::acos(std::min(1.0, svd.singularValues()[i])));
    }
    std::sort(report.angles.begin(), report.angles.end());
    const double worst = report.angles.empty() ? 0.0 : report.angles.back();
    report.pass = report.dim == k && worst < 1e-3 && report.negatives == 1;
    return report;
}

}  // namespace qgamma
