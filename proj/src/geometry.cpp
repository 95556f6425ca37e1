#include "qgamma/geometry.hpp"

#include <fftw3.h>

#include <algorithm>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include "qgamma/errors.hpp"
#include "qgamma/parallel.hpp"
#include "qgamma/special.hpp"

namespace qgamma {

using std::numbers::pi;

ProblemParams make_params(int n, double gamma) {
    if (n < 1 || n > 3) {
        throw ValidationError("dimension n must satisfy 1 <= n <= 3, got " + std::to_string(n));
    }
    if (!(gamma > 0.0)) {
        throw ValidationError("order gamma must be > 0, got " + std::to_string(gamma));
    }
    if (!(gamma < 0.5 * n)) {
        throw ValidationError("order gamma must be < n/2 = " + std::to_string(0.5 * n) + ", got " +
                              std::to_string(gamma));
    }
    ProblemParams params;
    params.n = n;
    params.gamma = gamma;
    params.p = (n + 2.0 * gamma) / (n - 2.0 * gamma);
    params.two_star = 2.0 * n / (n - 2.0 * gamma);
    return params;
}

// Natural cubic spline of values against u = log r.
class LogSpline {
public:
    LogSpline(const std::vector<double>& nodes, const std::vector<double>& values)
        : u_(nodes.size()), y_(values), m_(nodes.size(), 0.0) {
        const std::size_t count = nodes.size();
        for (std::size_t i = 0; i < count; ++i) u_[i] = std::log(nodes[i]);
        if (count < 3) return;
        // Tridiagonal system for the second derivatives (natural end conditions).
        std::vector<double> diag(count, 2.0), upper(count, 0.0), rhs(count, 0.0);
        diag[0] = diag[count - 1] = 1.0;
        for (std::size_t i = 1; i + 1 < count; ++i) {
            const double h0 = u_[i] - u_[i - 1];
            const double h1 = u_[i + 1] - u_[i];
            const double lower = h0 / (h0 + h1);
            upper[i] = h1 / (h0 + h1);
            rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0) / (h0 + h1);
            diag[i] -= lower * (i >= 2 ? upper[i - 1] : 0.0);
            rhs[i] -= lower * (i >= 2 ? rhs[i - 1] : 0.0);
            upper[i] /= diag[i];
            rhs[i] /= diag[i];
            diag[i] = 1.0;
        }
        m_[count - 1] = 0.0;
        for (std::size_t i = count - 2; i >= 1; --i) m_[i] = rhs[i] - upper[i] * m_[i + 1];
    }

    double operator()(double r) const {
        const double u = std::log(r);
        const auto it = std::upper_bound(u_.begin(), u_.end(), u);
        std::size_t hi = static_cast<std::size_t>(std::distance(u_.begin(), it));
        hi = std::clamp<std::size_t>(hi, 1, u_.size() - 1);
        const std::size_t lo = hi - 1;
        const double h = u_[hi] - u_[lo];
        const double a = (u_[hi] - u) / h;
        const double b = 1.0 - a;
        return a * y_[lo] + b * y_[hi] +
               ((a * a * a - a) * m_[lo] + (b * b * b - b) * m_[hi]) * h * h / 6.0;
    }

private:
    std::vector<double> u_;
    std::vector<double> y_;
    std::vector<double> m_;
};

RadialFunction RadialFunction::sample(std::function<double(double)> f, std::vector<double> nodes,
                                      double decay_exponent, bool keep_profile) {
    RadialFunction out;
    out.values.resize(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) out.values[i] = f(nodes[i]);
    out.nodes = std::move(nodes);
    out.decay_exponent = decay_exponent;
    out.validate();
    if (keep_profile) {
        out.profile = std::move(f);
    } else {
        out.spline = std::make_shared<LogSpline>(out.nodes, out.values);
    }
    return out;
}

RadialFunction RadialFunction::from_samples(std::vector<double> nodes, std::vector<double> values,
                                            double decay_exponent) {
    RadialFunction out;
    out.nodes = std::move(nodes);
    out.values = std::move(values);
    out.decay_exponent = decay_exponent;
    out.validate();
    out.spline = std::make_shared<LogSpline>(out.nodes, out.values);
    return out;
}

void RadialFunction::validate() const {
    if (nodes.size() != values.size()) throw ShapeError("radial function: nodes/values size mismatch");
    if (nodes.size() < 2) throw ValidationError("radial function needs at least two nodes");
    if (!(nodes.front() > 0.0)) throw ValidationError("radial nodes must be positive");
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        if (!(nodes[i] > nodes[i - 1])) throw ValidationError("radial nodes must be strictly increasing");
    }
    for (double v : values) {
        if (!std::isfinite(v)) throw ValidationError("radial values must be finite");
    }
}

double RadialFunction::operator()(double r) const {
    if (profile) return profile(r);
    if (r >= nodes.back()) {
        if (!std::isfinite(decay_exponent)) return 0.0;
        return values.back() * std::pow(r / nodes.back(), decay_exponent);
    }
    if (r <= nodes.front()) {
        const double r0 = nodes[0], r1 = nodes[1];
        const double slope = (values[1] - values[0]) / (r1 * r1 - r0 * r0);
        return values[0] + slope * (r * r - r0 * r0);
    }
    return (*spline)(r);
}

std::vector<double> log_nodes(double r_min, double r_max, std::size_t count) {
    if (!(r_min > 0.0) || !(r_max > r_min) || count < 2) {
        throw ValidationError("log_nodes: need 0 < r_min < r_max and count >= 2");
    }
    std::vector<double> out(count);
    const double a = std::log(r_min), b = std::log(r_max);
    for (std::size_t i = 0; i < count; ++i) {
        out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
    }
    out.front() = r_min;
    out.back() = r_max;
    return out;
}

namespace {

std::complex<double> mellin_multiplier(std::complex<double> s, double n, double gamma) {
    using special::log_gamma;
    const std::complex<double> log_value = gamma * std::log(4.0) + log_gamma(0.5 * (s + 2.0 * gamma)) +
                                           log_gamma(0.5 * (n - s)) - log_gamma(0.5 * s) -
                                           log_gamma(0.5 * (n - s - 2.0 * gamma));
    return std::exp(log_value);
}

// Trigonometric interpolant H(u) = Re sum_k C_k exp(-2 pi i k (u - u0) / period).
struct MellinSeries {
    double u0 = 0.0;
    double step = 0.0;
    std::size_t count = 0;
    double weight_exponent = 0.0;  // g(r) = r^{-weight_exponent} H(log r)
    std::vector<std::complex<double>> coeff;

    double weighted(double u) const {
        const double t = (u - u0) / step;
        double sum = coeff[0].real();
        for (std::size_t k = 1; k < coeff.size(); ++k) {
            const double phase = -2.0 * pi * static_cast<double>(k) * t / static_cast<double>(count);
            const std::complex<double> rot(std::cos(phase), std::sin(phase));
            const double factor = (k == count / 2) ? 1.0 : 2.0;
            sum += factor * (coeff[k] * rot).real();
        }
        return sum;
    }
};

}  // namespace

double power_law_multiplier(double s, const ProblemParams& params) {
    return mellin_multiplier({s, 0.0}, params.n, params.gamma).real();
}

RadialFunction frac_laplacian_radial(const RadialFunction& f, const ProblemParams& params,
                                     const RadialTransformOptions& options) {
    f.validate();
    const double n = params.n;
    const double gamma = params.gamma;
    const double decay_rate = -f.decay_exponent;
    if (!(decay_rate > 0.0)) {
        throw AccuracyError("frac_laplacian_radial: profile must decay (decay_exponent < 0)", 0.0,
                            std::numeric_limits<double>::infinity());
    }
    const double strip_top = std::min(decay_rate, n - 2.0 * gamma);
    const double q = std::isnan(options.bias) ? 0.5 * strip_top : options.bias;
    if (!(q > 0.0 && q < strip_top)) {
        throw ValidationError("frac_laplacian_radial: Mellin line must lie in (0, " +
                              std::to_string(strip_top) + ")");
    }
    const double tail_rate = std::min(decay_rate, n) - q;
    const double u_lo = std::min(std::log(f.nodes.front()), 0.0) - options.tail_digits / q;
    const double u_hi = std::max(std::log(f.nodes.back()), 0.0) + options.tail_digits / tail_rate;
    std::size_t count = static_cast<std::size_t>(std::ceil((u_hi - u_lo) / options.log_step));
    count += count % 2;
    const double step = (u_hi - u_lo) / static_cast<double>(count);

    std::vector<double> h(count);
    parallel_for(count, [&](std::size_t j) {
        const double u = u_lo + step * static_cast<double>(j);
        h[j] = f(std::exp(u)) * std::exp(q * u);
    });
    double h_max = 0.0;
    for (double v : h) h_max = std::max(h_max, std::abs(v));
    if (h_max == 0.0) {
        RadialFunction zero = f;
        std::fill(zero.values.begin(), zero.values.end(), 0.0);
        zero.profile = [](double) { return 0.0; };
        zero.spline.reset();
        return zero;
    }
    const double input_leak = std::max(std::abs(h.front()), std::abs(h.back())) / h_max;

    const std::size_t half = count / 2 + 1;
    std::vector<std::complex<double>> spectrum(half);
    {
        std::vector<double> input = h;
        fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(count), input.data(),
                                              reinterpret_cast<fftw_complex*>(spectrum.data()),
                                              FFTW_ESTIMATE);
        fftw_execute(plan);
        fftw_destroy_plan(plan);
    }

    MellinSeries series;
    series.u0 = u_lo;
    series.step = step;
    series.count = count;
    series.weight_exponent = q + 2.0 * gamma;
    series.coeff.resize(half);
    double coeff_max = 0.0;
    for (std::size_t k = 0; k < half; ++k) {
        const double omega = 2.0 * pi * static_cast<double>(k) / (static_cast<double>(count) * step);
        // Forward transform uses exp(+i omega u): conjugate FFTW's convention.
        const std::complex<double> mellin = std::conj(spectrum[k]) * step;
        const std::complex<double> multiplier = mellin_multiplier({q, omega}, n, gamma);
        series.coeff[k] = mellin * multiplier / (static_cast<double>(count) * step);
        coeff_max = std::max(coeff_max, std::abs(series.coeff[k]));
    }
    // Modes below the FFT rounding floor carry only noise, which the growing
    // multiplier would amplify; drop the tail past the last resolved mode.
    double h_sum = 0.0;
    for (double v : h) h_sum += std::abs(v);
    const double floor = 64.0 * std::numeric_limits<double>::epsilon() * h_sum * step;
    std::size_t resolved = 0;
    for (std::size_t k = 0; k < half; ++k) {
        if (std::abs(spectrum[k]) * step > floor) resolved = k;
    }
    double spectral_leak = 0.0;
    for (std::size_t k = half - std::max<std::size_t>(half / 16, 1); k < half; ++k) {
        if (k <= resolved) spectral_leak = std::max(spectral_leak, std::abs(series.coeff[k]) / coeff_max);
    }
    for (std::size_t k = resolved + 1; k < half; ++k) series.coeff[k] = 0.0;
    series.coeff.resize(resolved + 1);

    RadialFunction out;
    out.nodes = f.nodes;
    out.values.resize(f.nodes.size());
    parallel_for(f.nodes.size(), [&](std::size_t i) {
        const double u = std::log(f.nodes[i]);
        out.values[i] = std::exp(-series.weight_exponent * u) * series.weighted(u);
    });

    // The interpolant must also vanish at the ends of its period.
    const double out_scale =
        std::max(std::abs(series.weighted(0.0)),
                 std::abs(series.weighted(u_lo + 0.5 * (u_hi - u_lo))));
    const double output_leak =
        std::max(std::abs(series.weighted(u_lo)), std::abs(series.weighted(u_hi - step))) /
        std::max(out_scale, std::numeric_limits<double>::min());
    const double leak = std::max({input_leak, spectral_leak, output_leak});
    if (leak > options.tolerance) {
        std::ostringstream msg;
        msg << "frac_laplacian_radial: transform not converged (input tail " << input_leak
            << ", spectral tail " << spectral_leak << ", output tail " << output_leak << ")";
        throw AccuracyError(msg.str(), leak, leak);
    }

    const double tail_decay = (std::abs(decay_rate - (n - 2.0 * gamma)) < 1e-12)
                                  ? -(n + 2.0 * gamma)
                                  : -(std::min(decay_rate, n) + 2.0 * gamma);
    out.decay_exponent = tail_decay;
    auto shared = std::make_shared<const MellinSeries>(std::move(series));
    const double r_lo = std::exp(u_lo), r_hi = std::exp(u_hi - step);
    out.profile = [shared, r_lo, r_hi, tail_decay](double r) {
        if (r < r_lo) r = r_lo;
        if (r > r_hi) {
            const double edge = std::exp(-shared->weight_exponent * std::log(r_hi)) *
                                shared->weighted(std::log(r_hi));
            return edge * std::pow(r / r_hi, tail_decay);
        }
        const double u = std::log(r);
        return std::exp(-shared->weight_exponent * u) * shared->weighted(u);
    };
    return out;
}

double pv_constant(int n, double gamma) {
    return std::pow(4.0, gamma) * std::tgamma(0.5 * n + gamma) /
           (std::pow(pi, 0.5 * n) * std::abs(std::tgamma(-gamma)));
}

namespace {

// Fourth-order central-difference Laplacian.
double fd_laplacian(const ScalarField& f, const PointN& x, double h) {
    const double center = f(x);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        PointN y = x;
        double acc = -30.0 * center;
        for (int s : {-2, -1, 1, 2}) {
            y = x;
            y[i] += s * h;
            acc += (std::abs(s) == 1 ? 16.0 : -1.0) * f(y);
        }
        sum += acc / (12.0 * h * h);
    }
    return sum;
}

// Orthonormal frame whose first vector points from x toward the focus.
Eigen::MatrixXd angular_frame(const PointN& x, const PointN& focus) {
    const Eigen::Index n = x.size();
    Eigen::VectorXd axis = (focus - x);
    if (axis.norm() < 1e-300) {
        axis = Eigen::VectorXd::Unit(n, 0);
    }
    axis.normalize();
    // Gram-Schmidt completion, starting from the coordinate axes.
    Eigen::MatrixXd frame(n, n);
    frame.col(0) = axis;
    Eigen::Index filled = 1;
    for (Eigen::Index j = 0; j < n && filled < n; ++j) {
        Eigen::VectorXd v = Eigen::VectorXd::Unit(n, j);
        for (Eigen::Index k = 0; k < filled; ++k) v -= frame.col(k).dot(v) * frame.col(k);
        if (v.norm() > 1e-8) frame.col(filled++) = v.normalized();
    }
    return frame;
}

double pv_fractional(const ScalarField& f, const PointN& x, int n, double sigma,
                     const PvOptions& options) {
    const PointN focus = options.focus.size() == x.size() ? options.focus : PointN::Zero(x.size());
    const Eigen::MatrixXd frame = angular_frame(x, focus);
    const double fx = f(x);
    const double distance = (focus - x).norm();
    const double tol = options.tolerance;

    auto point = [&](double rho, const Eigen::VectorXd& dir) {
        PointN y = x + rho * dir;
        return f(y);
    };

    // Spherical integral of f(x) - (f(x + rho w) + f(x - rho w))/2 over S^{n-1},
    // folded onto the hemisphere around the pole.
    auto pair = [&](double rho, const Eigen::VectorXd& dir) {
        return 2.0 * fx - point(rho, dir) - point(rho, -dir);
    };
    auto shell = [&](double rho) -> double {
        if (n == 1) return pair(rho, frame.col(0));
        if (n == 2) {
            auto integrand = [&](double theta) {
                return pair(rho, std::cos(theta) * frame.col(0) + std::sin(theta) * frame.col(1));
            };
            return special::integrate_gk(integrand, -0.5 * pi, 0.5 * pi, tol * 0.1, 8);
        }
        const int m = options.angular_nodes;
        auto integrand = [&](double theta) {
            double acc = 0.0;
            for (int k = 0; k < m; ++k) {
                const double phi = 2.0 * pi * k / m;
                acc += pair(rho, std::cos(theta) * frame.col(0) +
                                     std::sin(theta) * (std::cos(phi) * frame.col(1) +
                                                        std::sin(phi) * frame.col(2)));
            }
            return acc * (2.0 * pi / m) * std::sin(theta);
        };
        return special::integrate_gk(integrand, 0.0, 0.5 * pi, tol * 0.1, 8);
    };

    const double delta = options.taylor_radius;
    const double area = special::sphere_area(n);
    const double lap = fd_laplacian(f, x, std::max(1e-3, 2.0 * delta));
    double total = -area * lap * std::pow(delta, 2.0 - 2.0 * sigma) / (2.0 * n * (2.0 - 2.0 * sigma));

    std::vector<double> breaks = {delta, 0.25, 0.5, 1.0, 2.0, 4.0};
    for (double factor : {0.5, 0.9, 1.0, 1.1, 2.0}) breaks.push_back(factor * distance);
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::remove_if(breaks.begin(), breaks.end(), [&](double b) { return b < delta; }),
                 breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end(),
                             [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                 breaks.end());
    auto radial = [&](double rho) { return std::pow(rho, -1.0 - 2.0 * sigma) * shell(rho); };
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        total += special::integrate_gk(radial, breaks[i], breaks[i + 1], tol, 10);
    }
    boost::math::quadrature::exp_sinh<double> tail;
    const double start = breaks.back();
    total += tail.integrate([&](double t) { return radial(start + t); }, tol);
    return pv_constant(n, sigma) * total;
}

}  // namespace

double frac_laplacian_pv(const ScalarField& f, const PointN& x, const ProblemParams& params,
                         const PvOptions& options) {
    if (x.size() != params.n) throw ShapeError("frac_laplacian_pv: point dimension mismatch");
    const double gamma = params.gamma;
    if (gamma < 1.0) return pv_fractional(f, x, params.n, gamma, options);
    ScalarField laplacian = [&f](const PointN& y) {
        return -fd_laplacian(f, y, 1e-3 * (1.0 + y.norm()));
    };
    if (std::abs(gamma - 1.0) < 1e-14) return laplacian(x);
    PvOptions inner = options;
    inner.taylor_radius = std::max(options.taylor_radius, 1e-2);
    return pv_fractional(laplacian, x, params.n, gamma - 1.0, inner);
}

double sphere_multiplier(int k, const ProblemParams& params) {
    if (k < 0) throw ValidationError("sphere_multiplier: degree must be nonnegative");
    const double half_n = 0.5 * params.n;
    return special::gamma_ratio(k + half_n + params.gamma, k + half_n - params.gamma);
}

PointN plane_to_sphere(const PointN& x) {
    const double r2 = x.squaredNorm();
    PointN zeta(x.size() + 1);
    zeta.head(x.size()) = 2.0 * x / (1.0 + r2);
    zeta[x.size()] = (r2 - 1.0) / (r2 + 1.0);
    return zeta;
}

PointN sphere_to_plane(const PointN& zeta) {
    const Eigen::Index n = zeta.size() - 1;
    const double denom = 1.0 - zeta[n];
    if (!(denom > 0.0)) throw DomainError("sphere_to_plane: north pole has no plane image");
    return zeta.head(n) / denom;
}

double conformal_weight(const PointN& x, const ProblemParams& params) {
    return std::pow(2.0 / (1.0 + x.squaredNorm()), 0.5 * params.bubble_decay());
}

}  // namespace qgamma
