#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "qgamma/curvature.hpp"
#include "qgamma/degree.hpp"
#include "qgamma/geometry.hpp"
#include "qgamma/reduced.hpp"

namespace qgamma {

enum class Verdict { pass, fail, not_applicable, unknown };
std::string to_string(Verdict v);

/// One hypothesis check: verdict, a one-line reason and named evidence in
/// insertion order.
struct ConditionCheck {
    Verdict verdict = Verdict::unknown;
    std::string note;
    std::vector<std::pair<std::string, double>> evidence;

    bool passed() const { return verdict == Verdict::pass; }
};

struct K1Options {
    int shells = 11;              ///< radii eta * 2^j, j < shells
    int probes_per_shell = 500;
    std::uint64_t seed = 1;
    double integral_tol = 1e-8;   ///< relative, segment quadrature and tail bound
    int max_segments = 40;        ///< dyadic radial segments before giving up
};

/// Boundedness screen, sign of <K'(x), x> on dyadic shells beyond eta, and
/// the integral of <K'(x), x> over R^n with a geometric tail bound.
ConditionCheck check_K1(const CurvatureField& K, const K1Options& opt = {});

struct K2Result {
    ConditionCheck check;
    CritSearch search;
};

/// Critical points of K in the search box (which must contain B_eta).
K2Result check_K2(const CurvatureField& K, const Box& search_box, const CritOptions& opt = {});

struct BetaEstimate {
    double beta = 0.0;
    double A = 0.0;          ///< NaN when the integral defining it diverges (beta outside (1, n))
    int A_sign = 0;          ///< sign of A, or of Laplacian K when A is not defined
    double fit_quality = 1.0;  ///< R^2 of the log-log fit; 1 on the Hessian route
    std::string route;       ///< "hessian", "expansion" or "fit"
    bool verified = false;
    std::string note;
};

/// Order beta of the first nonconstant term of K at xi and the coefficient A.
BetaEstimate estimate_beta_A(const CurvatureField& K, const PointN& xi, const ProblemParams& params);

struct CritRecord {
    PointN xi;
    int local_degree = 0;
    bool certified = false;
    double laplacian = 0.0;
    BetaEstimate beta;
    std::optional<PowerExpansion> expansion;  ///< explicit power coefficients, when K carries them
};

/// Records for each critical point, in the order given.
std::vector<CritRecord> crit_records(const CurvatureField& K, const std::vector<CritPoint>& points,
                                     const ProblemParams& params);

ConditionCheck check_K3(const std::vector<CritRecord>& crit, int n);
ConditionCheck check_K4(const std::vector<CritRecord>& crit, int n, const ConditionCheck& k3);
ConditionCheck check_K5(const std::vector<CritRecord>& crit, int n);
ConditionCheck check_K6(const std::vector<CritRecord>& crit, int n);

/// Gamma' as a map on R^{n+1}, (mu, xi) -> grad Gamma(mu, xi), even in mu.
/// Holds a reference: rf must outlive the map.
MapUnderTest reduced_gradient_map(const ReducedFunctional& rf);

struct ApplicabilityOptions {
    K1Options k1;
    CritOptions crit;
    double search_half_width = 0.0;  ///< K2 box half-width; 0 means 2 eta
    ReducedQuadrature quadrature{1e-9, 11, 48, 16, 32, false};
    double radius = 0.0;             ///< R for the balls and boxes; 0 means automatic
    double mu_min = 0.05;
    int mu_min_halvings = 4;
    bool global_degree = true;
    DegreeOptions degree{1e-7, 2, 24, false, 14};  ///< tol covers the quadrature error of Gamma'
};

struct OmegaBox {
    Box box;
    int degree = 0;
    int predicted = 0;  ///< sum_{A<0} deg_loc - (-1)^n
    bool certified = false;
    std::size_t evaluations = 0;
};

struct ConditionReport {
    std::string K_name;
    ProblemParams params;
    ConditionCheck k1, k2, k3, k4, k5, k6;
    std::vector<CritRecord> crit_set;
    std::vector<std::string> crit_diagnostics;
    int sum_A_positive = 0;
    int sum_A_negative = 0;
    bool degree_identity = false;    ///< sum_{A>0} + sum_{A<0} = (-1)^n
    double max_gamma_residual = 0.0;  ///< max |Gamma'(0, xi)| over the critical set
    double radius = 0.0;
    std::optional<int> global_degree;  ///< deg(Gamma', B_R^{n+1}, 0)
    std::optional<OmegaBox> omega;
    std::string verdict;               ///< "applicable", "not-applicable" or "unknown"
    std::string reason;
    std::vector<std::string> errors;

    bool applicable() const { return verdict == "applicable"; }
};

/// Runs every checker and, when the hypotheses hold, certifies a box Omega in
/// mu > 0 with deg(Gamma', Omega, 0) != 0.
ConditionReport theorem_applicability(const CurvatureField& K, const ProblemParams& params,
                                      const ApplicabilityOptions& opt = {});

nlohmann::ordered_json to_json(const ConditionCheck& c);
nlohmann::ordered_json to_json(const ConditionReport& r);
std::string report_text(const ConditionReport& r);

}  // namespace qgamma
