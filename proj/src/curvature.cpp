#include "qgamma/curvature.hpp"

#include <cmath>
#include <memory>

#include "qgamma/errors.hpp"

namespace qgamma {

PointN CurvatureField::gradient(const PointN& x) const {
    if (grad) return grad(x);
    const double h = 1e-5 * (1.0 + x.norm());
    PointN g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        PointN xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        g[i] = (eval(xp) - eval(xm)) / (2.0 * h);
    }
    return g;
}

MatrixN CurvatureField::hessian_at(const PointN& x) const {
    if (hessian) return hessian(x);
    const Eigen::Index n = x.size();
    MatrixN H(n, n);
    if (grad) {
        const double h = 1e-5 * (1.0 + x.norm());
        for (Eigen::Index j = 0; j < n; ++j) {
            PointN xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            H.col(j) = (grad(xp) - grad(xm)) / (2.0 * h);
        }
        return 0.5 * (H + H.transpose());
    }
    const double h = 1e-4 * (1.0 + x.norm());
    const double f0 = eval(x);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            if (i == j) {
                PointN xp = x, xm = x;
                xp[i] += h;
                xm[i] -= h;
                H(i, i) = (eval(xp) - 2.0 * f0 + eval(xm)) / (h * h);
            } else {
                PointN a = x, b = x, c = x, d = x;
                a[i] += h; a[j] += h;
                b[i] += h; b[j] -= h;
                c[i] -= h; c[j] += h;
                d[i] -= h; d[j] -= h;
                H(i, j) = H(j, i) = (eval(a) - eval(b) - eval(c) + eval(d)) / (4.0 * h * h);
            }
        }
    }
    return H;
}

namespace {

struct TermEval {
    double value;
    PointN grad;
    MatrixN hess;
};

TermEval eval_term(const CurvatureTerm& t, const PointN& x, bool want_hessian) {
    const Eigen::Index n = x.size();
    TermEval out{0.0, PointN::Zero(n), MatrixN::Zero(n, n)};
    if (t.kind == CurvatureTerm::Kind::constant) {
        out.value = t.amplitude;
        return out;
    }
    const PointN y = x - t.center;
    const double w2 = t.width * t.width;
    switch (t.kind) {
        case CurvatureTerm::Kind::gaussian: {
            const double g = t.amplitude * std::exp(-y.squaredNorm() / w2);
            out.value = g;
            out.grad = -2.0 * g / w2 * y;
            if (want_hessian) {
                out.hess = g * (4.0 / (w2 * w2) * (y * y.transpose()) - 2.0 / w2 * MatrixN::Identity(n, n));
            }
            break;
        }
        case CurvatureTerm::Kind::rational: {
            const double D = 1.0 + y.squaredNorm() / w2;
            out.value = t.amplitude / D;
            out.grad = -2.0 * t.amplitude / (w2 * D * D) * y;
            if (want_hessian) {
                out.hess = -2.0 * t.amplitude / (w2 * D * D) * MatrixN::Identity(n, n) +
                           8.0 * t.amplitude / (w2 * w2 * D * D * D) * (y * y.transpose());
            }
            break;
        }
        case CurvatureTerm::Kind::cusp: {
            const double b = t.power;
            const double scale = std::pow(t.width, b);
            double s = 0.0;
            PointN ds(n), dds(n);
            for (Eigen::Index j = 0; j < n; ++j) {
                const double a = std::abs(y[j]);
                s += std::pow(a, b) / scale;
                ds[j] = (y[j] > 0 ? 1.0 : (y[j] < 0 ? -1.0 : 0.0)) * b * std::pow(a, b - 1.0) / scale;
                dds[j] = a > 0 ? b * (b - 1.0) * std::pow(a, b - 2.0) / scale
                               : (b > 2.0 ? 0.0 : (b == 2.0 ? 2.0 / scale : std::numeric_limits<double>::infinity()));
            }
            const double k = t.amplitude * std::exp(-s);
            out.value = k;
            out.grad = -k * ds;
            if (want_hessian) {
                out.hess = k * (ds * ds.transpose());
                for (Eigen::Index j = 0; j < n; ++j) out.hess(j, j) -= k * dds[j];
            }
            break;
        }
        case CurvatureTerm::Kind::constant:
            break;
    }
    return out;
}

}  // namespace

CurvatureField make_term_sum(std::string name, int n, std::vector<CurvatureTerm> terms, double eta) {
    if (n < 1 || n > 3) throw ValidationError("curvature: dimension must be 1..3");
    if (terms.empty()) throw ValidationError("curvature: at least one term is required");
    for (auto& t : terms) {
        if (t.kind != CurvatureTerm::Kind::constant) {
            if (t.center.size() == 0) t.center = PointN::Zero(n);
            if (t.center.size() != n) throw ValidationError("curvature: term center has wrong dimension");
            if (!(t.width > 0.0)) throw ValidationError("curvature: term width must be > 0");
            if (t.kind == CurvatureTerm::Kind::cusp && !(t.power > 1.0)) {
                throw ValidationError("curvature: cusp power must be > 1");
            }
        }
    }
    if (!(eta > 0.0)) throw ValidationError("curvature: eta must be > 0");
    auto shared = std::make_shared<const std::vector<CurvatureTerm>>(std::move(terms));
    CurvatureField k;
    k.name = std::move(name);
    k.n = n;
    k.eta = eta;
    k.tail_value = 0.0;
    for (const auto& t : *shared) {
        if (t.kind == CurvatureTerm::Kind::constant) k.tail_value += t.amplitude;
    }
    k.eval = [shared](const PointN& x) {
        double v = 0.0;
        for (const auto& t : *shared) v += eval_term(t, x, false).value;
        return v;
    };
    k.grad = [shared](const PointN& x) {
        PointN g = PointN::Zero(x.size());
        for (const auto& t : *shared) g += eval_term(t, x, false).grad;
        return g;
    };
    k.hessian = [shared](const PointN& x) {
        MatrixN h = MatrixN::Zero(x.size(), x.size());
        for (const auto& t : *shared) h += eval_term(t, x, true).hess;
        return h;
    };
    k.expansion = [shared](const PointN& xi) -> std::optional<PowerExpansion> {
        for (const auto& t : *shared) {
            if (t.kind != CurvatureTerm::Kind::cusp || t.power >= 2.0) continue;
            if ((xi - t.center).norm() > 1e-9) continue;
            PowerExpansion e;
            e.beta = t.power;
            e.coefficients.assign(static_cast<std::size_t>(xi.size()), -t.amplitude / std::pow(t.width, t.power));
            return e;
        }
        return std::nullopt;
    };
    return k;
}

std::vector<std::string> builtin_curvature_names() {
    return {"constant", "cusp", "gaussian", "rational", "two_bump"};
}

CurvatureField builtin_curvature(const std::string& name, int n) {
    using Kind = CurvatureTerm::Kind;
    if (name == "rational") return make_term_sum(name, n, {{Kind::rational, 1.0, PointN::Zero(n), 1.0, 0.0}}, 1.0);
    if (name == "gaussian") return make_term_sum(name, n, {{Kind::gaussian, 1.0, PointN::Zero(n), 1.0, 0.0}}, 1.0);
    if (name == "cusp") return make_term_sum(name, n, {{Kind::cusp, 1.0, PointN::Zero(n), 1.0, 1.5}}, 1.0);
    if (name == "constant") return make_term_sum(name, n, {{Kind::constant, 1.0, PointN(), 1.0, 0.0}}, 1.0);
    if (name == "two_bump") {
        PointN e1 = PointN::Zero(n);
        e1[0] = 1.0;
        return make_term_sum(name, n,
                             {{Kind::gaussian, 1.0, e1, kTwoBumpWidth, 0.0},
                              {Kind::gaussian, 1.0, PointN(-e1), kTwoBumpWidth, 0.0}},
                             1.5);
    }
    throw ValidationError("unknown built-in curvature '" + name + "'");
}

}  // namespace qgamma
