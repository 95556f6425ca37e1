#include "qgamma/degree.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "qgamma/errors.hpp"
#include "qgamma/parallel.hpp"
#include "qgamma/special.hpp"

namespace qgamma {

namespace {

void check_map(const MapUnderTest& m, const Box& box) {
    if (m.dim < 1 || m.dim > 4) throw ValidationError("degree: dimension must be in 1..4");
    if (!m.eval) throw ValidationError("degree: map has no evaluator");
    if (box.lower.size() != m.dim || box.upper.size() != m.dim) throw ShapeError("degree: box dimension mismatch");
    for (int i = 0; i < m.dim; ++i) {
        if (!(box.upper[i] > box.lower[i])) throw ValidationError("degree: box must have positive extent");
    }
}

PointN evaluate(const MapUnderTest& m, const PointN& x) {
    PointN f = m.eval(x);
    if (f.size() != m.dim) throw ShapeError("degree: map returned a vector of the wrong size");
    for (int i = 0; i < m.dim; ++i) {
        if (!std::isfinite(f[i])) throw DomainError("degree: map is not finite on the query region");
    }
    return f;
}

struct BoundaryDegree {
    int degree = 0;
    bool certified = false;
    double min_norm = 0.0;
    int depth = 0;
    std::size_t evaluations = 0;
};

// A corner or split point landed on a zero of a reduced map.
struct Ambiguous {};
struct Unresolved {
    int depth;
};

// Split ratios: off-centre so that split points avoid symmetry planes.
constexpr std::array<double, 4> kSplitRatios = {0.4871, 0.5263, 0.4619, 0.5427};
constexpr double kSpreadRatio = 0.25;

// Degree by face reduction: for a k-cell with active components c_1..c_k,
//   deg = sum over faces F of s_F deg((f_c2..f_ck)|F, F ∩ {f_c1 > 0}),
// s_F = side * (-1)^(position of the fixed axis), down to k = 1 where
// deg = [f(b) > 0] - [f(a) > 0]. The restricted degree on a face is
// resolved by splitting until f_c1 has one sign on a subcell or some
// remaining component keeps its sign there.
class FaceReduction {
public:
    FaceReduction(const MapUnderTest& m, const DegreeOptions& opt) : m_(m), opt_(opt) {}

    BoundaryDegree run(const Box& box) {
        const int d = m_.dim;
        std::vector<int> axes(static_cast<std::size_t>(d)), comps(static_cast<std::size_t>(d));
        std::iota(axes.begin(), axes.end(), 0);
        std::iota(comps.begin(), comps.end(), 0);
        // Top-level faces run concurrently; each retries with another split
        // ratio when a split point hits a zero of a reduced map.
        const std::size_t faces = static_cast<std::size_t>(2 * d);
        std::vector<int> parts(faces, 0);
        std::vector<int> status(faces, 0);  // 0 ok, 1 ambiguous, 2 unresolved
        std::vector<int> unresolved_depth(faces, 0);
        parallel_for(faces, [&](std::size_t q) {
            const int i = static_cast<int>(q / 2);
            const int side = q % 2 == 0 ? -1 : 1;
            Box face = box;
            if (side < 0) face.upper[i] = box.lower[i];
            else face.lower[i] = box.upper[i];
            std::vector<int> free_axes, rest(comps.begin() + 1, comps.end());
            for (int a : axes)
                if (a != i) free_axes.push_back(a);
            const int s = side * (i % 2 == 0 ? 1 : -1);
            for (std::size_t attempt = 0; attempt < kSplitRatios.size(); ++attempt) {
                try {
                    parts[q] = d == 1 ? s * (positive(face.lower, comps[0]) ? 1 : 0)
                                      : s * restricted(face, free_axes, rest, comps[0], 0, kSplitRatios[attempt], true);
                    status[q] = 0;
                    return;
                } catch (const Ambiguous&) {
                    status[q] = 1;
                } catch (const Unresolved& u) {
                    status[q] = 2;
                    unresolved_depth[q] = u.depth;
                    return;
                }
            }
        });
        BoundaryDegree out;
        out.min_norm = min_norm();
        out.depth = max_depth_.load();
        out.evaluations = cache_size();
        if (out.min_norm <= opt_.tol) {
            std::ostringstream msg;
            msg << "brouwer_degree: map vanishes on the boundary (|m| = " << out.min_norm << " <= tol)";
            throw DegreeError(msg.str(), 0, out.depth);
        }
        int total = 0;
        for (int p : parts) total += p;
        for (std::size_t q = 0; q < faces; ++q) {
            if (status[q] == 1) throw DegreeError("brouwer_degree: a reduced map vanishes on a face edge", total, out.depth);
            if (status[q] == 2) {
                std::ostringstream msg;
                msg << "brouwer_degree: boundary cells not certified at depth " << opt_.max_depth << " (min |m| = "
                    << out.min_norm << ")";
                throw DegreeError(msg.str(), total, unresolved_depth[q]);
            }
        }
        out.degree = total;
        out.certified = true;
        return out;
    }

private:
    struct KeyHash {
        std::size_t operator()(const std::array<double, 4>& k) const {
            std::size_t h = 1469598103934665603ull;
            for (double v : k) {
                std::uint64_t bits;
                std::memcpy(&bits, &v, sizeof bits);
                h = (h ^ bits) * 1099511628211ull;
            }
            return h;
        }
    };

    PointN value(const PointN& x) {
        std::array<double, 4> key{};
        for (int i = 0; i < x.size(); ++i) key[static_cast<std::size_t>(i)] = x[i];
        {
            std::lock_guard lock(mutex_);
            auto it = cache_.find(key);
            if (it != cache_.end()) return it->second;
        }
        PointN f = evaluate(m_, x);
        std::lock_guard lock(mutex_);
        min_norm_ = std::min(min_norm_, f.norm());
        cache_.emplace(key, f);
        return f;
    }

    double min_norm() {
        std::lock_guard lock(mutex_);
        return min_norm_;
    }
    std::size_t cache_size() {
        std::lock_guard lock(mutex_);
        return cache_.size();
    }

    bool positive(const PointN& x, int comp) {
        const double v = value(x)[comp];
        if (std::abs(v) <= opt_.tol) throw Ambiguous{};
        return v > 0.0;
    }

    std::vector<PointN> corners(const Box& cell, const std::vector<int>& free_axes) const {
        const std::size_t k = free_axes.size();
        std::vector<PointN> out;
        for (std::size_t b = 0; b < (static_cast<std::size_t>(1) << k); ++b) {
            PointN x = cell.lower;
            for (std::size_t j = 0; j < k; ++j)
                if ((b >> j) & 1u) x[free_axes[j]] = cell.upper[free_axes[j]];
            out.push_back(x);
        }
        return out;
    }

    // deg of (f_comps) on the cell, which spans free_axes.
    int degree(const Box& cell, const std::vector<int>& free_axes, const std::vector<int>& comps, double ratio) {
        const std::size_t k = free_axes.size();
        if (k == 1) {
            PointN a = cell.lower, b = cell.lower;
            b[free_axes[0]] = cell.upper[free_axes[0]];
            return (positive(b, comps[0]) ? 1 : 0) - (positive(a, comps[0]) ? 1 : 0);
        }
        int total = 0;
        const std::vector<int> rest(comps.begin() + 1, comps.end());
        for (std::size_t i = 0; i < k; ++i) {
            const int axis = free_axes[i];
            std::vector<int> face_axes;
            for (std::size_t j = 0; j < k; ++j)
                if (j != i) face_axes.push_back(free_axes[j]);
            for (int side : {-1, 1}) {
                Box face = cell;
                if (side < 0) face.upper[axis] = cell.lower[axis];
                else face.lower[axis] = cell.upper[axis];
                const int s = side * (i % 2 == 0 ? 1 : -1);
                total += s * restricted(face, face_axes, rest, comps[0], 0, ratio, false);
            }
        }
        return total;
    }

    // deg of (f_comps) on face ∩ {f_lead > 0}.
    // Depth counts splits within one reduction level; forced splits apply to
    // the faces of the original box only.
    int restricted(const Box& face, const std::vector<int>& free_axes, const std::vector<int>& comps, int lead,
                   int depth, double ratio, bool top) {
        {
            int seen = max_depth_.load();
            while (depth > seen && !max_depth_.compare_exchange_weak(seen, depth)) {
            }
        }
        if (top && depth < opt_.min_depth) return split(face, free_axes, comps, lead, depth, ratio, top);
        auto pts = corners(face, free_axes);
        pts.push_back(0.5 * (face.lower + face.upper));
        std::vector<PointN> vals;
        vals.reserve(pts.size());
        for (const auto& p : pts) vals.push_back(value(p));
        // A sign is decided when every sample clears tol and the spread of
        // the samples is small against their size.
        auto sign_of = [&](int comp) {
            bool pos = true, neg = true;
            double lo = std::numeric_limits<double>::infinity(), hi = -lo, small = lo;
            for (const auto& v : vals) {
                pos = pos && v[comp] > opt_.tol;
                neg = neg && v[comp] < -opt_.tol;
                lo = std::min(lo, v[comp]);
                hi = std::max(hi, v[comp]);
                small = std::min(small, std::abs(v[comp]));
            }
            if (small < kSpreadRatio * (hi - lo)) return 0;
            return pos ? 1 : (neg ? -1 : 0);
        };
        const int lead_sign = sign_of(lead);
        if (lead_sign < 0) return 0;
        for (int c : comps)
            if (sign_of(c) != 0) return 0;
        if (lead_sign > 0) return degree(face, free_axes, comps, ratio);
        if (depth >= opt_.max_depth) throw Unresolved{depth};
        return split(face, free_axes, comps, lead, depth, ratio, top);
    }

    // Splits every free axis at the ratio point.
    int split(const Box& face, const std::vector<int>& free_axes, const std::vector<int>& comps, int lead, int depth,
              double ratio, bool top) {
        const std::size_t k = free_axes.size();
        int total = 0;
        for (std::size_t b = 0; b < (static_cast<std::size_t>(1) << k); ++b) {
            Box child = face;
            for (std::size_t j = 0; j < k; ++j) {
                const int a = free_axes[j];
                const double mid = face.lower[a] + ratio * (face.upper[a] - face.lower[a]);
                if ((b >> j) & 1u) child.lower[a] = mid;
                else child.upper[a] = mid;
            }
            total += restricted(child, free_axes, comps, lead, depth + 1, ratio, top);
        }
        return total;
    }

    const MapUnderTest& m_;
    DegreeOptions opt_;
    std::mutex mutex_;
    std::unordered_map<std::array<double, 4>, PointN, KeyHash> cache_;
    double min_norm_ = std::numeric_limits<double>::infinity();
    std::atomic<int> max_depth_{0};
};

double spectral_norm(const MatrixN& J) {
    Eigen::JacobiSVD<MatrixN> svd(J);
    return svd.singularValues()[0];
}

// Unnormalized bump exp(-1/(1 - s^2)) and its integral over the unit ball.
double bump(double s2) { return s2 < 1.0 ? std::exp(-1.0 / (1.0 - s2)) : 0.0; }

double bump_mass(int d) {
    const double radial = special::integrate_gk(
        [d](double s) { return std::pow(s, d - 1) * bump(s * s); }, 0.0, 1.0, 1e-13);
    return special::sphere_area(d) * radial;
}

using Mask = std::function<bool(const PointN&)>;

struct MollifiedIntegral {
    const MapUnderTest& m;
    double delta;
    int max_depth;
    Mask inside;
    double norm = 0.0;

    double leaf(const PointN& lo, const PointN& hi) const {
        static const double gx[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
        static const double gw[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};
        const int d = m.dim;
        const PointN c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
        const double step = std::max(1e-7, 1e-3 * h.minCoeff());
        int total = 1;
        for (int i = 0; i < d; ++i) total *= 4;
        double sum = 0.0;
        for (int q = 0; q < total; ++q) {
            PointN x(d);
            double w = 1.0;
            int rest = q;
            for (int i = 0; i < d; ++i) {
                const int j = rest % 4;
                rest /= 4;
                x[i] = c[i] + h[i] * gx[j];
                w *= gw[j] * h[i];
            }
            if (inside && !inside(x)) continue;
            const PointN f = evaluate(m, x);
            const double s2 = f.squaredNorm() / (delta * delta);
            if (s2 >= 1.0) continue;
            sum += w * bump(s2) * fd_jacobian(m, x, step).determinant();
        }
        return sum;
    }

    double cell(const PointN& lo, const PointN& hi, int depth) const {
        const int d = m.dim;
        const PointN c = 0.5 * (lo + hi);
        const double rho = 0.5 * (hi - lo).norm();
        const PointN fc = evaluate(m, c);
        double L = m.lipschitz_hint.value_or(0.0);
        if (!m.lipschitz_hint) {
            L = spectral_norm(fd_jacobian(m, c, 1e-3 * rho));
            for (int b = 0; b < (1 << d); ++b) {
                PointN x(d);
                for (int i = 0; i < d; ++i) x[i] = ((b >> i) & 1) ? hi[i] : lo[i];
                L = std::max(L, (evaluate(m, x) - fc).norm() / rho);
            }
            L *= 2.0;
        }
        if (fc.norm() - L * rho > delta) return 0.0;
        if (L * rho < 0.5 * delta || depth >= max_depth) return leaf(lo, hi);
        double sum = 0.0;
        for (int b = 0; b < (1 << d); ++b) {
            PointN a(d), z(d);
            for (int i = 0; i < d; ++i) {
                const bool upper = (b >> i) & 1;
                a[i] = upper ? c[i] : lo[i];
                z[i] = upper ? hi[i] : c[i];
            }
            sum += cell(a, z, depth + 1);
        }
        return sum;
    }
};

double mollified_integral(const MapUnderTest& m, const Box& box, double delta, int max_depth, Mask inside) {
    const int d = m.dim;
    MollifiedIntegral mi{m, delta, max_depth, std::move(inside)};
    // Top level split into 4^d cells, processed concurrently.
    int top = 1;
    for (int i = 0; i < d; ++i) top *= 4;
    std::vector<double> parts(static_cast<std::size_t>(top), 0.0);
    parallel_for(parts.size(), [&](std::size_t q) {
        PointN lo(d), hi(d);
        std::size_t rest = q;
        for (int i = 0; i < d; ++i) {
            const int j = static_cast<int>(rest % 4);
            rest /= 4;
            const double w = (box.upper[i] - box.lower[i]) / 4.0;
            lo[i] = box.lower[i] + j * w;
            hi[i] = lo[i] + w;
        }
        parts[q] = mi.cell(lo, hi, 2);
    });
    double sum = 0.0;
    for (double v : parts) sum += v;
    return sum / (bump_mass(d) * std::pow(delta, d));
}

DegreeResult finish(const MapUnderTest& m, const BoundaryDegree& bd, const DegreeOptions& opt,
                    const std::function<double(double)>& integral) {
    DegreeResult out;
    out.degree = bd.degree;
    out.certified = bd.certified;
    out.min_boundary_norm = bd.min_norm;
    out.subdivision_depth = bd.depth;
    out.evaluations = bd.evaluations;
    if (opt.cross_check) {
        const double I = integral(0.25 * bd.min_norm);
        out.integral_estimate = I;
        out.routes_agree = std::abs(I - bd.degree) < 0.25;
    }
    (void)m;
    return out;
}

}  // namespace

MatrixN fd_jacobian(const MapUnderTest& m, const PointN& x, double step) {
    const int d = m.dim;
    MatrixN J(d, d);
    for (int j = 0; j < d; ++j) {
        PointN xp = x, xm = x;
        xp[j] += step;
        xm[j] -= step;
        J.col(j) = (evaluate(m, xp) - evaluate(m, xm)) / (2.0 * step);
    }
    return J;
}

double mollified_degree_integral(const MapUnderTest& m, const Box& box, double delta, int max_depth) {
    check_map(m, box);
    if (!(delta > 0.0)) throw ValidationError("mollified_degree_integral: delta must be positive");
    return mollified_integral(m, box, delta, max_depth, nullptr);
}

DegreeResult brouwer_degree(const MapUnderTest& m, const Box& box, const DegreeOptions& opt) {
    check_map(m, box);
    if (opt.max_depth < 0 || opt.max_depth > 40) throw ValidationError("brouwer_degree: max_depth must be in 0..40");
    FaceReduction fr(m, opt);
    const auto bd = fr.run(box);
    return finish(m, bd, opt, [&](double delta) {
        return mollified_integral(m, box, delta, opt.integral_max_depth, nullptr);
    });
}

DegreeResult ball_degree(const MapUnderTest& m, const PointN& center, double radius, const DegreeOptions& opt) {
    if (!(radius > 0.0)) throw ValidationError("ball_degree: radius must be positive");
    Box box{center.array() - radius, center.array() + radius};
    check_map(m, box);
    if (opt.max_depth < 0 || opt.max_depth > 40) throw ValidationError("ball_degree: max_depth must be in 0..40");
    // Only boundary points are evaluated: pull the cube boundary onto the sphere.
    MapUnderTest pulled{m.dim, [&](const PointN& x) { return m.eval(PointN(center + radius * (x - center).normalized())); },
                        std::nullopt};
    FaceReduction fr(pulled, opt);
    const auto bd = fr.run(box);
    return finish(m, bd, opt, [&](double delta) {
        const double r2 = radius * radius;
        return mollified_integral(m, box, delta, opt.integral_max_depth,
                                  [&](const PointN& x) { return (x - center).squaredNorm() <= r2; });
    });
}

std::optional<int> inward_shortcut(const MapUnderTest& m, const PointN& center, double radius, int probes_per_axis) {
    const int d = m.dim;
    if (center.size() != d) throw ShapeError("inward_shortcut: center dimension mismatch");
    if (probes_per_axis < 2) throw ValidationError("inward_shortcut: need at least 2 probes per axis");
    const int k = d - 1;
    std::size_t per_face = 1;
    for (int i = 0; i < k; ++i) per_face *= static_cast<std::size_t>(probes_per_axis);
    const std::size_t total = per_face * static_cast<std::size_t>(2 * d);
    std::vector<char> inward(total, 0);
    parallel_for(total, [&](std::size_t q) {
        const std::size_t face = q / per_face;
        std::size_t rest = q % per_face;
        const int axis = static_cast<int>(face / 2);
        PointN u(d);
        u[axis] = face % 2 == 0 ? -1.0 : 1.0;
        for (int i = 0; i < d; ++i) {
            if (i == axis) continue;
            const int j = static_cast<int>(rest % static_cast<std::size_t>(probes_per_axis));
            rest /= static_cast<std::size_t>(probes_per_axis);
            u[i] = -1.0 + 2.0 * j / (probes_per_axis - 1);
        }
        const PointN offset = radius * u.normalized();
        inward[q] = evaluate(m, PointN(center + offset)).dot(offset) < 0.0 ? 1 : 0;
    });
    for (char c : inward)
        if (!c) return std::nullopt;
    return d % 2 == 0 ? 1 : -1;
}

int local_degree(const MapUnderTest& m, const PointN& zero, double radius, const DegreeOptions& opt) {
    if (!(radius > 0.0)) throw ValidationError("local_degree: radius must be positive");
    Box box{zero.array() - radius, zero.array() + radius};
    DegreeOptions o = opt;
    o.cross_check = false;
    return brouwer_degree(m, box, o).degree;
}

std::vector<PointN> grid_seeds(const Box& box, int per_axis) {
    const int d = static_cast<int>(box.lower.size());
    if (per_axis < 1) throw ValidationError("grid_seeds: per_axis must be >= 1");
    std::size_t total = 1;
    for (int i = 0; i < d; ++i) total *= static_cast<std::size_t>(per_axis);
    std::vector<PointN> seeds(total);
    for (std::size_t q = 0; q < total; ++q) {
        PointN x(d);
        std::size_t rest = q;
        for (int i = 0; i < d; ++i) {
            const int j = static_cast<int>(rest % static_cast<std::size_t>(per_axis));
            rest /= static_cast<std::size_t>(per_axis);
            x[i] = box.lower[i] + (box.upper[i] - box.lower[i]) * (j + 0.5) / per_axis;
        }
        seeds[q] = x;
    }
    return seeds;
}

namespace {

struct NewtonOutcome {
    bool converged = false;
    PointN x;
    double residual = 0.0;
    std::string why;
};

NewtonOutcome newton(const MapUnderTest& m, const Box& box, PointN x, const CritOptions& opt) {
    NewtonOutcome out;
    const PointN span = box.upper - box.lower;
    PointN f = evaluate(m, x);
    double fn = f.norm();
    for (int it = 0; it < opt.max_iterations; ++it) {
        if (fn <= opt.residual_tol) {
            out.converged = true;
            break;
        }
        const double h = 1e-6 * (1.0 + x.cwiseAbs().maxCoeff());
        const MatrixN J = fd_jacobian(m, x, h);
        Eigen::FullPivLU<MatrixN> lu(J);
        lu.setThreshold(1e-13);
        if (!lu.isInvertible()) {
            out.why = "singular Jacobian";
            break;
        }
        const PointN dx = lu.solve(PointN(-f));
        double lambda = 1.0;
        PointN xn;
        PointN fnew;
        double fnn = 0.0;
        bool accepted = false;
        while (lambda > 1e-8) {
            xn = x + lambda * dx;
            fnew = evaluate(m, xn);
            fnn = fnew.norm();
            if (fnn < (1.0 - 1e-4 * lambda) * fn) {
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!accepted) {
            // Stagnation at the evaluation noise floor counts as converged.
            if (fn <= 1e3 * opt.residual_tol) out.converged = true;
            else out.why = "line search failed";
            break;
        }
        x = xn;
        f = fnew;
        fn = fnn;
        for (int i = 0; i < m.dim; ++i) {
            if (x[i] < box.lower[i] - 0.25 * span[i] || x[i] > box.upper[i] + 0.25 * span[i]) {
                out.why = "left the search box";
                out.x = x;
                out.residual = fn;
                return out;
            }
        }
    }
    if (!out.converged && out.why.empty()) out.why = fn <= opt.residual_tol ? "" : "iteration limit";
    if (fn <= opt.residual_tol) out.converged = true;
    if (out.converged) {
        const double h = 1e-6 * (1.0 + x.cwiseAbs().maxCoeff());
        if (fd_jacobian(m, x, h).cwiseAbs().maxCoeff() <= opt.residual_tol) {
            out.converged = false;
            out.why = "map vanishes identically near the zero";
        }
    }
    out.x = x;
    out.residual = fn;
    return out;
}

bool lex_less(const PointN& a, const PointN& b) {
    for (int i = 0; i < a.size(); ++i) {
        if (a[i] != b[i]) return a[i] < b[i];
    }
    return false;
}

}  // namespace

std::vector<PointN> exclusion_seeds(const MapUnderTest& m, const Box& box, int min_depth, int max_depth) {
    check_map(m, box);
    const int d = m.dim;
    struct Cell {
        PointN lo, hi;
    };
    std::vector<Cell> current = {{box.lower, box.upper}};
    std::vector<PointN> seeds;
    for (int depth = 0; depth <= max_depth && !current.empty(); ++depth) {
        // A cell survives unless one component keeps a sign with margin at
        // its corners and centre.
        std::vector<char> keep(current.size(), 1);
        if (depth >= min_depth) {
            parallel_for(current.size(), [&](std::size_t q) {
                const auto& c = current[q];
                const PointN mid = 0.5 * (c.lo + c.hi);
                const double rho = 0.5 * (c.hi - c.lo).norm();
                std::vector<PointN> vals = {evaluate(m, mid)};
                for (int b = 0; b < (1 << d); ++b) {
                    PointN x(d);
                    for (int i = 0; i < d; ++i) x[i] = ((b >> i) & 1) ? c.hi[i] : c.lo[i];
                    vals.push_back(evaluate(m, x));
                }
                const MatrixN J = fd_jacobian(m, mid, 1e-3 * rho);
                for (int i = 0; i < d; ++i) {
                    const double margin = 0.1 * rho * J.row(i).norm();
                    bool sign_kept = true;
                    for (const auto& v : vals) {
                        if (std::abs(v[i]) <= margin || (v[i] > 0) != (vals[0][i] > 0)) {
                            sign_kept = false;
                            break;
                        }
                    }
                    if (sign_kept) {
                        keep[q] = 0;
                        return;
                    }
                }
            });
        }
        std::vector<Cell> next;
        for (std::size_t q = 0; q < current.size(); ++q) {
            if (!keep[q]) continue;
            const auto& c = current[q];
            const PointN mid = 0.5 * (c.lo + c.hi);
            if (depth == max_depth) {
                seeds.push_back(mid);
                continue;
            }
            for (int b = 0; b < (1 << d); ++b) {
                Cell child{PointN(d), PointN(d)};
                for (int i = 0; i < d; ++i) {
                    const bool upper = (b >> i) & 1;
                    child.lo[i] = upper ? mid[i] : c.lo[i];
                    child.hi[i] = upper ? c.hi[i] : mid[i];
                }
                next.push_back(child);
            }
        }
        current = std::move(next);
    }
    return seeds;
}

CritSearch crit_points(const MapUnderTest& m, const Box& box, const std::vector<PointN>& given_seeds,
                       const CritOptions& opt) {
    check_map(m, box);
    CritSearch out;
    const std::vector<PointN> seeds =
        given_seeds.empty() ? exclusion_seeds(m, box, 2, m.dim <= 2 ? 6 : (m.dim == 3 ? 5 : 4)) : given_seeds;
    out.seeds_tried = static_cast<int>(seeds.size());
    std::vector<NewtonOutcome> runs(seeds.size());
    parallel_for(seeds.size(), [&](std::size_t i) {
        if (seeds[i].size() != m.dim) throw ShapeError("crit_points: seed dimension mismatch");
        runs[i] = newton(m, box, seeds[i], opt);
    });

    std::vector<NewtonOutcome> found;
    std::map<std::string, int> failures;
    for (const auto& r : runs) {
        if (!r.converged) {
            ++failures[r.why];
            continue;
        }
        ++out.seeds_converged;
        bool inside = true;
        for (int i = 0; i < m.dim; ++i) inside = inside && r.x[i] > box.lower[i] && r.x[i] < box.upper[i];
        if (inside) found.push_back(r);
        else ++failures["converged outside the box"];
    }
    for (const auto& [why, count] : failures) {
        std::ostringstream s;
        s << count << " seed(s): " << why;
        out.diagnostics.push_back(s.str());
    }

    // Cluster: smallest residual first, ties broken lexicographically.
    std::sort(found.begin(), found.end(), [](const NewtonOutcome& a, const NewtonOutcome& b) {
        if (a.residual != b.residual) return a.residual < b.residual;
        return lex_less(a.x, b.x);
    });
    const double diam = (box.upper - box.lower).norm();
    const double merge = opt.cluster_rel * diam;
    std::vector<NewtonOutcome> reps;
    for (const auto& r : found) {
        bool dup = false;
        for (const auto& q : reps) dup = dup || (r.x - q.x).norm() < merge;
        if (!dup) reps.push_back(r);
    }
    std::vector<CritPoint> certified;
    int rejected = 0;
    for (std::size_t i = 0; i < reps.size(); ++i) {
        double nearest = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < reps.size(); ++j)
            if (j != i) nearest = std::min(nearest, (reps[i].x - reps[j].x).norm());
        double radius = std::min(0.45 * nearest, 0.05 * diam);
        bool ok = false;
        for (int attempt = 0; attempt < 3 && !ok; ++attempt, radius *= 0.25) {
            try {
                CritPoint cp;
                cp.x = reps[i].x;
                cp.residual = reps[i].residual;
                cp.local_degree = local_degree(m, cp.x, radius, opt.degree);
                cp.isolation_radius = radius;
                cp.jacobian_det = fd_jacobian(m, cp.x, 1e-6 * (1.0 + cp.x.cwiseAbs().maxCoeff())).determinant();
                certified.push_back(cp);
                ok = true;
            } catch (const DegreeError&) {
            }
        }
        if (!ok) ++rejected;
    }
    out.uncertified = rejected;
    if (rejected > 0) {
        std::ostringstream s;
        s << rejected << " candidate zero(s) not certified isolated";
        out.diagnostics.push_back(s.str());
    }
    std::sort(certified.begin(), certified.end(),
              [](const CritPoint& a, const CritPoint& b) { return lex_less(a.x, b.x); });
    out.points = std::move(certified);
    return out;
}

}  // namespace qgamma
