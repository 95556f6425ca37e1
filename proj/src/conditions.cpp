#include "qgamma/conditions.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include "qgamma/errors.hpp"
#include "qgamma/special.hpp"

namespace qgamma {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int parity(int n) { return n % 2 == 0 ? 1 : -1; }

std::string fmt(double v, int precision = 6) {
    std::ostringstream s;
    s << std::setprecision(precision) << v;
    return s.str();
}

std::string point_string(const PointN& x) {
    std::ostringstream s;
    s << "(";
    for (int i = 0; i < x.size(); ++i) s << (i ? ", " : "") << std::setprecision(6) << x[i];
    s << ")";
    return s.str();
}

ConditionCheck make_check(Verdict v, std::string note) {
    ConditionCheck c;
    c.verdict = v;
    c.note = std::move(note);
    return c;
}

PointN random_direction(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    PointN w(n);
    do {
        for (int i = 0; i < n; ++i) w[i] = g(rng);
    } while (w.norm() < 1e-12);
    return w / w.norm();
}

void k1_directions(int n, std::vector<PointN>& dirs, std::vector<double>& weights) {
    special::sphere_rule(n, 256, 24, 48, dirs, weights);
}

// Hessian at xi if K is C^2 there: finite, and stable under 1e-4 shifts
// (a Hessian that blows up next to xi marks a cusp).
std::optional<MatrixN> smooth_hessian(const CurvatureField& K, const PointN& xi) {
    const MatrixN H = K.hessian_at(xi);
    if (!H.allFinite()) return std::nullopt;
    const double scale = std::max(H.norm(), 1e-6);
    for (int i = 0; i < xi.size(); ++i) {
        for (double s : {-1e-4, 1e-4}) {
            PointN y = xi;
            y[i] += s;
            const MatrixN Hy = K.hessian_at(y);
            if (!Hy.allFinite() || (Hy - H).norm() > 0.05 * scale) return std::nullopt;
        }
    }
    return H;
}

// Numerically at the tail: the value is at the tail up to rounding of the
// tail itself (finite-difference gradients vanish there too).
bool flat_at(const CurvatureField& K, const PointN& x) {
    return std::isfinite(K.tail_value) &&
           std::abs(K.value(x) - K.tail_value) <= 1e-14 * std::max(1.0, std::abs(K.tail_value));
}

}  // namespace

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        case Verdict::not_applicable: return "not-applicable";
        case Verdict::unknown: return "unknown";
    }
    return "unknown";
}

ConditionCheck check_K1(const CurvatureField& K, const K1Options& opt) {
    if (!K.eval) throw ValidationError("check_K1: K has no eval");
    if (!(K.eta > 0.0)) throw ValidationError("check_K1: eta must be > 0");
    if (opt.shells < 2 || opt.probes_per_shell < 1) throw ValidationError("check_K1: need >= 2 shells and >= 1 probe");
    const int n = K.n;

    // Shell probes, log-uniform radius within [eta 2^j, eta 2^{j+1}).
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> shell_sup(opt.shells, 0.0);
    long negatives = 0, flat = 0, violations = 0;
    double worst = -std::numeric_limits<double>::infinity(), worst_radius = 0.0;
    bool nonfinite = false;
    for (int j = 0; j < opt.shells; ++j) {
        const double r0 = K.eta * std::ldexp(1.0, j);
        for (int i = 0; i < opt.probes_per_shell; ++i) {
            const double r = r0 * std::exp2(unit(rng));
            const PointN x = r * random_direction(n, rng);
            const double v = K.value(x);
            const double ip = K.gradient(x).dot(x);
            if (!std::isfinite(v) || !std::isfinite(ip)) {
                nonfinite = true;
                continue;
            }
            shell_sup[j] = std::max(shell_sup[j], std::abs(v));
            if (ip < 0.0) {
                ++negatives;
            } else if (ip == 0.0 && flat_at(K, x)) {
                ++flat;  // value and derivative have reached the tail exactly
            } else {
                ++violations;
                if (ip > worst) {
                    worst = ip;
                    worst_radius = r;
                }
            }
        }
    }
    ConditionCheck c;
    const long probes = static_cast<long>(opt.shells) * opt.probes_per_shell;
    c.evidence = {{"shells", opt.shells},
                  {"probes", static_cast<double>(probes)},
                  {"negative_probes", static_cast<double>(negatives)},
                  {"flat_probes", static_cast<double>(flat)},
                  {"violations", static_cast<double>(violations)},
                  {"sup_abs_K", *std::max_element(shell_sup.begin(), shell_sup.end())}};
    if (nonfinite) {
        c.verdict = Verdict::fail;
        c.note = "K or its gradient is not finite on a probe";
        return c;
    }
    // Boundedness screen: the outer shells must not keep growing.
    const std::size_t last = shell_sup.size() - 1;
    const bool growing = shell_sup[last] > 1e3 * std::max(1.0, shell_sup[0]) &&
                         shell_sup[last] > 1.5 * shell_sup[last - 1];
    if (growing) {
        c.verdict = Verdict::fail;
        c.note = "boundedness screen: sup |K| grows to " + fmt(shell_sup[last]) + " at |x| ~ " +
                 fmt(K.eta * std::ldexp(1.0, static_cast<int>(last)));
        return c;
    }
    if (violations > 0) {
        c.verdict = Verdict::fail;
        c.note = "<K'(x), x> = " + fmt(worst) + " >= 0 at |x| = " + fmt(worst_radius);
        return c;
    }

    // I = int_0^inf r^n int_S <K'(r w), w> dw dr over dyadic segments.
    std::vector<PointN> dirs;
    std::vector<double> weights;
    k1_directions(n, dirs, weights);
    auto angular = [&](double r, bool absolute) {
        double s = 0.0;
        for (std::size_t k = 0; k < dirs.size(); ++k) {
            const double g = K.gradient(PointN(r * dirs[k])).dot(dirs[k]);
            s += weights[k] * (absolute ? std::abs(g) : g);
        }
        return std::pow(r, n) * s;
    };
    double integral = 0.0, l1 = 0.0, tail = kNaN;
    std::vector<double> pieces;
    int segments = 0;
    bool converged = false, divergent = false;
    for (int k = -1; k < opt.max_segments; ++k) {
        const double a = k < 0 ? 0.0 : K.eta * std::ldexp(1.0, k);
        const double b = K.eta * std::ldexp(1.0, k + 1);
        integral += special::integrate_gk([&](double r) { return angular(r, false); }, a, b, 0.1 * opt.integral_tol);
        const double piece = special::integrate_gk([&](double r) { return angular(r, true); }, a, b,
                                                   0.1 * opt.integral_tol);
        l1 += piece;
        pieces.push_back(piece);
        ++segments;
        const std::size_t m = pieces.size();
        if (m < 5) continue;
        double q = 0.0;
        bool decaying = true, stalled = true;
        for (std::size_t i = m - 3; i < m; ++i) {
            const double ratio = pieces[i - 1] > 0.0 ? pieces[i] / pieces[i - 1] : (pieces[i] > 0.0 ? 2.0 : 0.0);
            q = std::max(q, ratio);
            decaying = decaying && ratio <= 0.7;
            stalled = stalled && ratio >= 0.9;
        }
        if (decaying) {
            tail = pieces[m - 1] * q / (1.0 - q);
            if (tail <= opt.integral_tol * l1 || l1 == 0.0) {
                converged = true;
                break;
            }
        }
        if (stalled && m >= 10) {
            divergent = true;
            break;
        }
    }
    c.evidence.emplace_back("integral", integral);
    c.evidence.emplace_back("integral_abs", l1);
    c.evidence.emplace_back("tail_bound", tail);
    c.evidence.emplace_back("segments", segments);
    if (divergent) {
        c.verdict = Verdict::fail;
        c.note = "<K'(x), x> is not integrable: dyadic pieces of |<K'(x), x>| do not decay";
        return c;
    }
    if (!converged) {
        c.verdict = Verdict::not_applicable;
        c.note = "quadrature of <K'(x), x> did not converge within " + std::to_string(segments) + " segments";
        return c;
    }
    const double margin = std::max(10.0 * opt.integral_tol * l1, 1e-300);
    if (!(integral < -margin)) {
        c.verdict = Verdict::fail;
        c.note = "int <K'(x), x> dx = " + fmt(integral) + " is not < 0";
        return c;
    }
    c.verdict = Verdict::pass;
    c.note = "<K'(x), x> < 0 on " + std::to_string(negatives) + " probes; int <K'(x), x> dx = " + fmt(integral);
    return c;
}

K2Result check_K2(const CurvatureField& K, const Box& search_box, const CritOptions& opt) {
    const int n = K.n;
    if (search_box.lower.size() != n || search_box.upper.size() != n) throw ShapeError("check_K2: box dimension");
    for (int i = 0; i < n; ++i) {
        if (search_box.lower[i] > -K.eta || search_box.upper[i] < K.eta) {
            throw ValidationError("check_K2: search box must contain the ball of radius eta");
        }
    }
    MapUnderTest m{n, [K](const PointN& x) { return K.gradient(x); }, std::nullopt};
    K2Result out;
    out.search = crit_points(m, search_box, {}, opt);
    ConditionCheck& c = out.check;
    int sum = 0, outside = 0;
    for (const auto& cp : out.search.points) {
        sum += cp.local_degree;
        if (cp.x.norm() >= K.eta) ++outside;
    }
    c.evidence = {{"critical_points", static_cast<double>(out.search.points.size())},
                  {"seeds_tried", static_cast<double>(out.search.seeds_tried)},
                  {"seeds_converged", static_cast<double>(out.search.seeds_converged)},
                  {"uncertified", static_cast<double>(out.search.uncertified)},
                  {"outside_eta", static_cast<double>(outside)},
                  {"local_degree_sum", static_cast<double>(sum)}};
    if (out.search.points.empty()) {
        c.verdict = Verdict::fail;
        c.note = "no isolated critical point found";
        for (const auto& d : out.search.diagnostics) c.note += "; " + d;
        return out;
    }
    if (out.search.uncertified > 0) {
        c.verdict = Verdict::unknown;
        c.note = std::to_string(out.search.uncertified) + " candidate critical point(s) not certified isolated";
        return out;
    }
    if (outside > 0) {
        c.verdict = Verdict::fail;
        c.note = std::to_string(outside) + " critical point(s) with |xi| >= eta";
        return out;
    }
    // Completeness: the degree on the box has to match the sum found.
    DegreeOptions dopt = opt.degree;
    dopt.cross_check = false;
    try {
        const int total = brouwer_degree(m, search_box, dopt).degree;
        c.evidence.emplace_back("box_degree", total);
        if (total != sum) {
            c.verdict = Verdict::unknown;
            c.note = "local degrees sum to " + std::to_string(sum) + " but the box degree is " + std::to_string(total);
            return out;
        }
    } catch (const DegreeError& e) {
        c.verdict = Verdict::unknown;
        c.note = std::string("box degree: ") + e.what();
        return out;
    }
    c.verdict = Verdict::pass;
    c.note = std::to_string(out.search.points.size()) + " isolated critical point(s), all in B_eta";
    return out;
}

BetaEstimate estimate_beta_A(const CurvatureField& K, const PointN& xi, const ProblemParams& params) {
    const int n = params.n;
    if (xi.size() != n || K.n != n) throw ShapeError("estimate_beta_A: dimension mismatch");
    BetaEstimate est;
    const auto smooth = smooth_hessian(K, xi);
    const double k0 = K.value(xi);

    if (smooth && smooth->norm() > 1e-9 * std::max(1.0, std::abs(k0))) {
        const MatrixN& H = *smooth;
        const double hnorm = H.norm();
        est.route = "hessian";
        est.beta = 2.0;
        const double lap = H.trace();
        if (std::abs(lap) <= 1e-9 * hnorm) {
            est.A = 0.0;
            est.A_sign = 0;
            est.note = "Laplacian vanishes: A = 0";
            return est;
        }
        est.A_sign = lap < 0.0 ? -1 : 1;
        if (n >= 3) {
            est.A = a_xi(quadratic_model(H), params);
            est.note = "A = c1 Laplacian K / 2";
        } else {
            est.A = kNaN;
            est.note = "beta = 2 is outside (1, n); sign taken from the Laplacian";
        }
        est.verified = true;
        return est;
    }

    // Log-log fit of the angular mean of |K(xi + r w) - K(xi)|.
    std::vector<PointN> dirs;
    std::vector<double> weights;
    special::sphere_rule(n, 64, 8, 16, dirs, weights);
    double wsum = 0.0;
    for (double w : weights) wsum += w;
    auto mean = [&](double r, bool absolute) {
        double s = 0.0;
        for (std::size_t k = 0; k < dirs.size(); ++k) {
            const double d = K.value(PointN(xi + r * dirs[k])) - k0;
            s += weights[k] * (absolute ? std::abs(d) : d);
        }
        return s / wsum;
    };
    est.route = "fit";
    const int count = 25;
    std::vector<double> lx, ly;
    for (int i = 0; i < count; ++i) {
        const double r = 1e-4 * std::pow(1e3, i / (count - 1.0));
        const double m = mean(r, true);
        if (!(m > 0.0)) {
            est.note = "K is flat at xi to working precision";
            est.fit_quality = 0.0;
            return est;
        }
        lx.push_back(std::log(r));
        ly.push_back(std::log(m));
    }
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < count; ++i) {
        mx += lx[i] / count;
        my += ly[i] / count;
    }
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (int i = 0; i < count; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    est.beta = sxy / sxx;
    est.fit_quality = syy > 0.0 ? sxy * sxy / (sxx * syy) : 0.0;
    const double signed_mean = mean(1e-3, false);
    const int fit_sign = signed_mean < 0.0 ? -1 : (signed_mean > 0.0 ? 1 : 0);
    if (est.fit_quality < 0.999) {
        est.note = "log-log fit R^2 = " + fmt(est.fit_quality) + " below 0.999";
        return est;
    }

    HomogeneousModel model;
    if (K.expansion) {
        if (auto e = K.expansion(xi)) {
            est.route = "expansion";
            if (std::abs(e->beta - est.beta) > 0.05) {
                est.note = "fitted beta " + fmt(est.beta) + " disagrees with the explicit exponent " + fmt(e->beta);
                return est;
            }
            model = power_model(e->beta, e->coefficients);
        }
    }
    if (!model.Q) {
        // Numerical homogeneous model from K on a small sphere.
        const double s = 1e-3, beta = est.beta;
        model.beta = beta;
        model.Q = [K, xi, k0, s, beta](const PointN& y) {
            const double r = y.norm();
            if (r == 0.0) return 0.0;
            return std::pow(r, beta) * (K.value(PointN(xi + (s / r) * y)) - k0) / std::pow(s, beta);
        };
    }
    est.A_sign = fit_sign;
    if (model.beta > 1.0 && model.beta < n) {
        est.A = a_xi(model, params, est.route == "fit" ? 1e-7 : 1e-12);
        const int a_sign = est.A < 0.0 ? -1 : (est.A > 0.0 ? 1 : 0);
        if (a_sign != fit_sign) {
            est.note = "sign of A disagrees with the sign of K(xi + r w) - K(xi)";
            est.A_sign = 0;
            return est;
        }
    } else {
        est.A = kNaN;
        est.note = "beta outside (1, n); sign taken from K(xi + r w) - K(xi)";
    }
    est.verified = est.A_sign != 0;
    return est;
}

std::vector<CritRecord> crit_records(const CurvatureField& K, const std::vector<CritPoint>& points,
                                     const ProblemParams& params) {
    std::vector<CritRecord> out;
    for (const auto& cp : points) {
        CritRecord r;
        r.xi = cp.x;
        r.local_degree = cp.local_degree;
        r.certified = cp.isolation_radius > 0.0;
        const auto H = smooth_hessian(K, cp.x);
        r.laplacian = H ? H->trace() : kNaN;
        r.beta = estimate_beta_A(K, cp.x, params);
        if (K.expansion) r.expansion = K.expansion(cp.x);
        out.push_back(std::move(r));
    }
    return out;
}

ConditionCheck check_K3(const std::vector<CritRecord>& crit, int n) {
    if (crit.empty()) return make_check(Verdict::fail, "no critical points");
    int in_range = 0;
    for (const auto& r : crit) {
        if (!r.beta.verified) {
            return make_check(Verdict::unknown, "beta/A not verified at " + point_string(r.xi) + ": " + r.beta.note);
        }
        if (!(r.beta.beta > 1.0 && r.beta.beta < n)) {
            return make_check(Verdict::fail, "beta = " + fmt(r.beta.beta) + " at " + point_string(r.xi) +
                                                 " is outside (1, " + std::to_string(n) + ")");
        }
        if (!(std::isfinite(r.beta.A) && r.beta.A != 0.0)) {
            return make_check(Verdict::fail, "A = 0 at " + point_string(r.xi));
        }
        ++in_range;
    }
    auto c = make_check(Verdict::pass, "beta in (1, n) and A != 0 at every critical point");
    c.evidence.emplace_back("points", in_range);
    return c;
}

namespace {

// sum of deg_loc over records with negative key, against (-1)^n.
ConditionCheck signed_sum_check(const std::vector<CritRecord>& crit, int n, const std::string& what,
                                const std::function<int(const CritRecord&)>& sign) {
    int sum_neg = 0, sum_pos = 0;
    for (const auto& r : crit) {
        if (!r.certified) return make_check(Verdict::unknown, "uncertified local degree at " + point_string(r.xi));
        const int s = sign(r);
        if (s < 0) sum_neg += r.local_degree;
        else sum_pos += r.local_degree;
    }
    const int target = parity(n);
    ConditionCheck c;
    c.evidence = {{"sum_negative", sum_neg}, {"sum_positive", sum_pos}, {"target", target}};
    const std::string sum = "sum over " + what + " < 0 of deg_loc = " + std::to_string(sum_neg);
    if (sum_neg != target) {
        c.verdict = Verdict::pass;
        c.note = sum + " != (-1)^n = " + std::to_string(target);
    } else {
        c.verdict = Verdict::fail;
        c.note = sum + " = (-1)^n";
    }
    return c;
}

}  // namespace

ConditionCheck check_K4(const std::vector<CritRecord>& crit, int n, const ConditionCheck& k3) {
    if (!k3.passed()) return make_check(Verdict::not_applicable, "requires (K3): " + k3.note);
    return signed_sum_check(crit, n, "A", [](const CritRecord& r) { return r.beta.A < 0.0 ? -1 : 1; });
}

ConditionCheck check_K5(const std::vector<CritRecord>& crit, int n) {
    if (crit.empty()) return make_check(Verdict::fail, "no critical points");
    for (const auto& r : crit) {
        if (!std::isfinite(r.laplacian)) {
            return make_check(Verdict::not_applicable, "K is not C^2 at " + point_string(r.xi));
        }
        if (r.laplacian == 0.0 || std::abs(r.laplacian) <= 1e-9) {
            return make_check(Verdict::fail, "Laplacian K vanishes at " + point_string(r.xi));
        }
    }
    return signed_sum_check(crit, n, "Laplacian K", [](const CritRecord& r) { return r.laplacian < 0.0 ? -1 : 1; });
}

ConditionCheck check_K6(const std::vector<CritRecord>& crit, int n) {
    if (crit.empty()) return make_check(Verdict::fail, "no critical points");
    for (const auto& r : crit) {
        if (!r.expansion) {
            return make_check(Verdict::not_applicable, "no explicit power coefficients at " + point_string(r.xi));
        }
        const double beta = r.expansion->beta;
        if (!(beta > 1.0 && beta < n)) {
            return make_check(Verdict::fail, "explicit exponent " + fmt(beta) + " outside (1, n)");
        }
        double tilde = 0.0;
        for (double a : r.expansion->coefficients) tilde += a;
        if (tilde == 0.0) return make_check(Verdict::fail, "coefficient sum vanishes at " + point_string(r.xi));
    }
    return signed_sum_check(crit, n, "coefficient sum", [](const CritRecord& r) {
        double tilde = 0.0;
        for (double a : r.expansion->coefficients) tilde += a;
        return tilde < 0.0 ? -1 : 1;
    });
}

MapUnderTest reduced_gradient_map(const ReducedFunctional& rf) {
    const int n = rf.params().n;
    return {n + 1,
            [&rf, n](const PointN& q) {
                const Eigen::VectorXd g = rf.grad(q[0], PointN(q.tail(n)));
                return PointN(g);
            },
            std::nullopt};
}

ConditionReport theorem_applicability(const CurvatureField& K, const ProblemParams& params,
                                      const ApplicabilityOptions& opt) {
    if (K.n != params.n) throw ShapeError("theorem_applicability: K and params disagree on n");
    const int n = params.n;
    ConditionReport rep;
    rep.K_name = K.name;
    rep.params = params;
    const auto skipped = make_check(Verdict::not_applicable, "not evaluated: (K1) fails");
    rep.k1 = check_K1(K, opt.k1);
    if (!rep.k1.passed()) {
        rep.k2 = rep.k3 = rep.k4 = rep.k5 = rep.k6 = skipped;
        rep.verdict = "not-applicable";
        rep.reason = "(K1): " + rep.k1.note;
        return rep;
    }

    const double half = opt.search_half_width > 0.0 ? opt.search_half_width : 2.0 * K.eta;
    const Box search{PointN::Constant(n, -half), PointN::Constant(n, half)};
    auto k2 = check_K2(K, search, opt.crit);
    rep.k2 = k2.check;
    rep.crit_diagnostics = k2.search.diagnostics;
    rep.crit_set = crit_records(K, k2.search.points, params);
    rep.k3 = check_K3(rep.crit_set, n);
    rep.k4 = check_K4(rep.crit_set, n, rep.k3);
    rep.k5 = check_K5(rep.crit_set, n);
    rep.k6 = check_K6(rep.crit_set, n);

    bool signs_known = !rep.crit_set.empty();
    for (const auto& r : rep.crit_set) {
        if (r.beta.A_sign < 0) rep.sum_A_negative += r.local_degree;
        else if (r.beta.A_sign > 0) rep.sum_A_positive += r.local_degree;
        else signs_known = false;
    }
    rep.degree_identity = signs_known && rep.sum_A_positive + rep.sum_A_negative == parity(n);

    if (!rep.k2.passed()) {
        rep.verdict = rep.k2.verdict == Verdict::fail ? "not-applicable" : "unknown";
        rep.reason = "(K2): " + rep.k2.note;
        return rep;
    }
    const bool hypothesis = rep.k4.passed() || rep.k5.passed() || rep.k6.passed();

    ReducedFunctional rf(K, params, opt.quadrature);
    const MapUnderTest gamma = reduced_gradient_map(rf);
    try {
        for (const auto& r : rep.crit_set) {
            rep.max_gamma_residual = std::max(rep.max_gamma_residual, rf.grad(0.0, r.xi).norm());
        }
        // Radius with <Gamma'(q), q> < 0 on the sphere |q| = R.
        double R = opt.radius > 0.0 ? opt.radius : std::max(2.0, 2.0 * K.eta);
        std::optional<int> inward;
        for (int attempt = 0; attempt < 4 && !inward; ++attempt) {
            inward = inward_shortcut(gamma, PointN::Zero(n + 1), R, 6);
            if (!inward) R *= 2.0;
        }
        if (!inward) {
            rep.errors.push_back("no radius found with Gamma' pointing inward on the sphere");
        } else {
            rep.radius = R;
            if (opt.global_degree) {
                rep.global_degree = ball_degree(gamma, PointN::Zero(n + 1), R, opt.degree).degree;
            }
        }
        if (hypothesis && inward) {
            double mu_min = opt.mu_min;
            for (int attempt = 0; attempt <= opt.mu_min_halvings; ++attempt, mu_min *= 0.5) {
                OmegaBox om;
                om.box.lower = PointN::Constant(n + 1, -R);
                om.box.upper = PointN::Constant(n + 1, R);
                om.box.lower[0] = mu_min;
                om.predicted = rep.sum_A_negative - parity(n);
                try {
                    const auto d = brouwer_degree(gamma, om.box, opt.degree);
                    om.degree = d.degree;
                    om.certified = d.certified;
                    om.evaluations = d.evaluations;
                    rep.omega = om;
                    break;
                } catch (const DegreeError& e) {
                    if (attempt == opt.mu_min_halvings) rep.errors.push_back(std::string("Omega degree: ") + e.what());
                }
            }
        }
    } catch (const std::exception& e) {
        rep.errors.push_back(e.what());
    }

    if (!hypothesis) {
        rep.verdict = "not-applicable";
        rep.reason = "no degree hypothesis holds; (K4): " + rep.k4.note + "; (K5): " + rep.k5.note +
                     "; (K6): " + rep.k6.note;
        return rep;
    }
    if (!rep.omega) {
        rep.verdict = "unknown";
        rep.reason = "degree of Gamma' on Omega could not be certified";
        return rep;
    }
    if (rep.omega->degree == 0) {
        rep.verdict = "unknown";
        rep.reason = "hypotheses hold but deg(Gamma', Omega, 0) = 0";
        return rep;
    }
    rep.verdict = "applicable";
    rep.reason = "deg(Gamma', Omega, 0) = " + std::to_string(rep.omega->degree);
    return rep;
}

nlohmann::ordered_json to_json(const ConditionCheck& c) {
    nlohmann::ordered_json j;
    j["verdict"] = to_string(c.verdict);
    j["note"] = c.note;
    nlohmann::ordered_json ev = nlohmann::ordered_json::object();
    for (const auto& [k, v] : c.evidence) {
        if (std::isfinite(v)) ev[k] = v;
        else ev[k] = nullptr;
    }
    j["evidence"] = ev;
    return j;
}

namespace {

nlohmann::ordered_json number_or_null(double v) {
    return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json point_json(const PointN& x) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (int i = 0; i < x.size(); ++i) a.push_back(x[i]);
    return a;
}

}  // namespace

nlohmann::ordered_json to_json(const ConditionReport& r) {
    nlohmann::ordered_json j;
    j["K"] = r.K_name;
    j["n"] = r.params.n;
    j["gamma"] = r.params.gamma;
    j["verdict"] = r.verdict;
    j["reason"] = r.reason;
    j["k1"] = to_json(r.k1);
    j["k2"] = to_json(r.k2);
    j["k3"] = to_json(r.k3);
    j["k4"] = to_json(r.k4);
    j["k5"] = to_json(r.k5);
    j["k6"] = to_json(r.k6);
    nlohmann::ordered_json crit = nlohmann::ordered_json::array();
    for (const auto& c : r.crit_set) {
        nlohmann::ordered_json e;
        e["xi"] = point_json(c.xi);
        e["deg_loc"] = c.local_degree;
        e["laplacian"] = number_or_null(c.laplacian);
        e["beta"] = number_or_null(c.beta.beta);
        e["A"] = number_or_null(c.beta.A);
        e["A_sign"] = c.beta.A_sign;
        e["route"] = c.beta.route;
        e["fit_quality"] = number_or_null(c.beta.fit_quality);
        e["verified"] = c.beta.verified;
        crit.push_back(e);
    }
    j["crit_set"] = crit;
    j["crit_diagnostics"] = r.crit_diagnostics;
    nlohmann::ordered_json book;
    book["sum_A_positive"] = r.sum_A_positive;
    book["sum_A_negative"] = r.sum_A_negative;
    book["identity_holds"] = r.degree_identity;
    book["max_gamma_residual"] = r.max_gamma_residual;
    book["radius"] = r.radius;
    book["global_degree"] = r.global_degree ? nlohmann::ordered_json(*r.global_degree) : nlohmann::ordered_json(nullptr);
    j["bookkeeping"] = book;
    if (r.omega) {
        nlohmann::ordered_json om;
        om["lower"] = point_json(r.omega->box.lower);
        om["upper"] = point_json(r.omega->box.upper);
        om["degree"] = r.omega->degree;
        om["predicted"] = r.omega->predicted;
        om["certified"] = r.omega->certified;
        j["omega_box"] = om;
    } else {
        j["omega_box"] = nullptr;
    }
    j["errors"] = r.errors;
    return j;
}

std::string report_text(const ConditionReport& r) {
    std::ostringstream s;
    s << "K = " << r.K_name << ", n = " << r.params.n << ", gamma = " << r.params.gamma << "\n";
    const std::pair<const char*, const ConditionCheck*> rows[] = {
        {"K1", &r.k1}, {"K2", &r.k2}, {"K3", &r.k3}, {"K4", &r.k4}, {"K5", &r.k5}, {"K6", &r.k6}};
    for (const auto& [name, c] : rows) {
        s << "  (" << name << ") " << std::left << std::setw(15) << to_string(c->verdict) << c->note << "\n";
    }
    if (!r.crit_set.empty()) s << "critical points:\n";
    for (const auto& c : r.crit_set) {
        s << "  xi = " << point_string(c.xi) << "  deg_loc = " << c.local_degree << "  Laplacian = " << fmt(c.laplacian)
          << "  beta = " << fmt(c.beta.beta, 4) << "  A = " << fmt(c.beta.A) << " [" << c.beta.route << "]\n";
    }
    s << "sum_{A>0} deg_loc = " << r.sum_A_positive << ", sum_{A<0} deg_loc = " << r.sum_A_negative
      << (r.degree_identity ? " (sum = (-1)^n)" : "") << "\n";
    if (r.global_degree) s << "deg(Gamma', B_R, 0) = " << *r.global_degree << " with R = " << r.radius << "\n";
    if (r.omega) {
        s << "Omega = [" << r.omega->box.lower[0] << ", " << r.omega->box.upper[0] << "] x [" << r.omega->box.lower[1]
          << ", " << r.omega->box.upper[1] << "]^" << r.params.n << ", deg(Gamma', Omega, 0) = " << r.omega->degree
          << " (predicted " << r.omega->predicted << ")\n";
    }
    for (const auto& e : r.errors) s << "error: " << e << "\n";
    s << "verdict: " << r.verdict << " (" << r.reason << ")\n";
    return s.str();
}

}  // namespace qgamma
