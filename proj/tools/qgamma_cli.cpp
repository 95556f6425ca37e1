// qgamma: batch front end for condition checks, landscapes, degrees and solves.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "qgamma/bubbles.hpp"
#include "qgamma/conditions.hpp"
#include "qgamma/curvature.hpp"
#include "qgamma/degree.hpp"
#include "qgamma/errors.hpp"
#include "qgamma/expression.hpp"
#include "qgamma/parallel.hpp"
#include "qgamma/reduced.hpp"
#include "qgamma/solver.hpp"

using namespace qgamma;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

constexpr int kSchemaVersion = 1;
constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitHypothesis = 2;

const std::vector<std::string> kCommands = {"check-k", "landscape", "degree", "verify-bubble",
                                            "solve",   "sweep",     "report"};

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& key, const std::string& what)
        : std::runtime_error("config error at '" + key + "': " + what) {}
};

struct Options {
    int L = 0;
    double tol = 0.0;
    int max_iterations = 30;
    double epsilon = 0.02;
    std::vector<double> eps_list = {0.005, 0.01, 0.02, 0.04};
    double eps_max = 0.05;
    double mu_min = 0.05;
    double mu_max = 4.0;
    double xi_half_width = 0.0;  // 0: 2 eta
    int resolution = 21;
    double radius = 0.0;  // 0: automatic
    bool global_degree = true;
    int k1_probes = 500;
    std::optional<Bubble> seed_bubble;
    std::vector<std::string> inputs;
};

struct RunConfig {
    std::string command;
    ProblemParams params;
    json K_spec;
    CurvatureField K;
    std::string K_label;
    bool K_finite_differences = false;
    Options options;
    fs::path output_dir = "qgamma_out";
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

// ---- config parsing --------------------------------------------------------

void reject_unknown(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw ConfigError(where.empty() ? it.key() : where + "." + it.key(), "unknown key");
        }
    }
}

double get_number(const json& v, const std::string& key) {
    if (!v.is_number()) throw ConfigError(key, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(key, "must be finite");
    return x;
}

int get_int(const json& v, const std::string& key) {
    if (!v.is_number_integer()) throw ConfigError(key, "expected an integer");
    return v.get<int>();
}

PointN get_point(const json& v, const std::string& key, int n) {
    if (!v.is_array() || static_cast<int>(v.size()) != n) {
        throw ConfigError(key, "expected an array of " + std::to_string(n) + " numbers");
    }
    PointN p(n);
    for (int i = 0; i < n; ++i) p[i] = get_number(v[static_cast<std::size_t>(i)], key + "[" + std::to_string(i) + "]");
    return p;
}

CurvatureField parse_terms(const json& spec, int n, const std::string& name) {
    const json& terms = spec["terms"];
    if (!terms.is_array() || terms.empty()) throw ConfigError("K.terms", "expected a nonempty array");
    std::vector<CurvatureTerm> out;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const std::string key = "K.terms[" + std::to_string(i) + "]";
        const json& t = terms[i];
        if (!t.is_object()) throw ConfigError(key, "expected an object");
        reject_unknown(t, key, {"kind", "amplitude", "center", "width", "power"});
        CurvatureTerm term;
        if (!t.contains("kind") || !t["kind"].is_string()) throw ConfigError(key + ".kind", "required string");
        const std::string kind = t["kind"];
        if (kind == "gaussian") term.kind = CurvatureTerm::Kind::gaussian;
        else if (kind == "rational") term.kind = CurvatureTerm::Kind::rational;
        else if (kind == "cusp") term.kind = CurvatureTerm::Kind::cusp;
        else if (kind == "constant") term.kind = CurvatureTerm::Kind::constant;
        else throw ConfigError(key + ".kind", "unknown kind '" + kind + "' (gaussian, rational, cusp, constant)");
        if (t.contains("amplitude")) term.amplitude = get_number(t["amplitude"], key + ".amplitude");
        term.center = t.contains("center") ? get_point(t["center"], key + ".center", n) : PointN::Zero(n);
        if (t.contains("width")) term.width = get_number(t["width"], key + ".width");
        if (!(term.width > 0.0)) throw ConfigError(key + ".width", "must be positive");
        if (t.contains("power")) term.power = get_number(t["power"], key + ".power");
        if (term.kind == CurvatureTerm::Kind::cusp && !(term.power > 0.0)) {
            throw ConfigError(key + ".power", "must be positive");
        }
        out.push_back(term);
    }
    const double eta = spec.contains("eta") ? get_number(spec["eta"], "K.eta") : 1.0;
    if (!(eta > 0.0)) throw ConfigError("K.eta", "must be positive");
    return make_term_sum(name, n, std::move(out), eta);
}

void parse_K(const json& spec, RunConfig& cfg) {
    const int n = cfg.params.n;
    if (spec.is_string()) {
        const std::string name = spec;
        const auto names = builtin_curvature_names();
        if (std::find(names.begin(), names.end(), name) == names.end()) {
            std::string list;
            for (const auto& s : names) list += (list.empty() ? "" : ", ") + s;
            throw ConfigError("K", "unknown built-in '" + name + "' (" + list + ")");
        }
        cfg.K = builtin_curvature(name, n);
        cfg.K_label = name;
        return;
    }
    if (!spec.is_object()) throw ConfigError("K", "expected a built-in name or an object");
    reject_unknown(spec, "K", {"name", "builtin", "terms", "expression", "eta", "tail_value"});
    const int kinds = spec.contains("builtin") + spec.contains("terms") + spec.contains("expression");
    if (kinds != 1) throw ConfigError("K", "give exactly one of 'builtin', 'terms' or 'expression'");
    std::string name = "custom";
    if (spec.contains("name")) {
        if (!spec["name"].is_string()) throw ConfigError("K.name", "expected a string");
        name = spec["name"];
    }
    if (spec.contains("builtin")) {
        if (!spec["builtin"].is_string()) throw ConfigError("K.builtin", "expected a string");
        for (const char* key : {"eta", "tail_value"}) {
            if (spec.contains(key)) throw ConfigError(std::string("K.") + key, "not allowed with a built-in");
        }
        parse_K(spec["builtin"], cfg);
        return;
    }
    if (spec.contains("terms")) {
        if (spec.contains("tail_value")) throw ConfigError("K.tail_value", "derived from the terms");
        cfg.K = parse_terms(spec, n, name);
        cfg.K_label = name;
        return;
    }
    if (!spec["expression"].is_string()) throw ConfigError("K.expression", "expected a string");
    CurvatureField K;
    K.name = name;
    K.n = n;
    try {
        K.eval = parse_expression(spec["expression"], n);
    } catch (const ValidationError& e) {
        throw ConfigError("K.expression", e.what());
    }
    K.eta = spec.contains("eta") ? get_number(spec["eta"], "K.eta") : 1.0;
    if (!(K.eta > 0.0)) throw ConfigError("K.eta", "must be positive");
    K.tail_value = spec.contains("tail_value") ? get_number(spec["tail_value"], "K.tail_value")
                                               : std::numeric_limits<double>::quiet_NaN();
    cfg.K = std::move(K);
    cfg.K_label = name;
    cfg.K_finite_differences = true;
}

std::vector<double> get_ascending(const json& v, const std::string& key) {
    if (!v.is_array()) throw ConfigError(key, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(get_number(v[i], key + "[" + std::to_string(i) + "]"));
    if (!std::is_sorted(out.begin(), out.end())) throw ConfigError(key, "must be ascending");
    return out;
}

void parse_options(const json& o, RunConfig& cfg) {
    if (!o.is_object()) throw ConfigError("options", "expected an object");
    reject_unknown(o, "options",
                   {"L", "tol", "max_iterations", "epsilon", "eps_list", "eps_max", "mu_range", "xi_half_width",
                    "resolution", "radius", "global_degree", "k1_probes", "seed_bubble", "inputs"});
    Options& opt = cfg.options;
    const int n = cfg.params.n;
    if (o.contains("L")) {
        opt.L = get_int(o["L"], "options.L");
        if (opt.L < 4 || opt.L > 256) throw ConfigError("options.L", "must lie in [4, 256]");
    }
    if (o.contains("tol")) {
        opt.tol = get_number(o["tol"], "options.tol");
        if (!(opt.tol > 0.0)) throw ConfigError("options.tol", "must be positive");
    }
    if (o.contains("max_iterations")) {
        opt.max_iterations = get_int(o["max_iterations"], "options.max_iterations");
        if (opt.max_iterations < 1) throw ConfigError("options.max_iterations", "must be at least 1");
    }
    if (o.contains("eps_max")) {
        opt.eps_max = get_number(o["eps_max"], "options.eps_max");
        if (!(opt.eps_max > 0.0)) throw ConfigError("options.eps_max", "must be positive");
    }
    if (o.contains("epsilon")) opt.epsilon = get_number(o["epsilon"], "options.epsilon");
    if (opt.epsilon < 0.0 || opt.epsilon > opt.eps_max) {
        throw ConfigError("options.epsilon", "must lie in [0, eps_max]");
    }
    if (o.contains("eps_list")) opt.eps_list = get_ascending(o["eps_list"], "options.eps_list");
    for (double e : opt.eps_list) {
        if (e < 0.0 || e > opt.eps_max) throw ConfigError("options.eps_list", "entries must lie in [0, eps_max]");
    }
    if (o.contains("mu_range")) {
        const auto r = get_ascending(o["mu_range"], "options.mu_range");
        if (r.size() != 2 || !(r[0] > 0.0) || !(r[1] > r[0])) {
            throw ConfigError("options.mu_range", "expected [mu_min, mu_max] with 0 < mu_min < mu_max");
        }
        opt.mu_min = r[0];
        opt.mu_max = r[1];
    }
    if (o.contains("xi_half_width")) {
        opt.xi_half_width = get_number(o["xi_half_width"], "options.xi_half_width");
        if (!(opt.xi_half_width > 0.0)) throw ConfigError("options.xi_half_width", "must be positive");
    }
    if (o.contains("resolution")) {
        opt.resolution = get_int(o["resolution"], "options.resolution");
        if (opt.resolution < 2 || opt.resolution > 201) throw ConfigError("options.resolution", "must lie in [2, 201]");
    }
    if (o.contains("radius")) {
        opt.radius = get_number(o["radius"], "options.radius");
        if (!(opt.radius > 0.0)) throw ConfigError("options.radius", "must be positive");
    }
    if (o.contains("global_degree")) {
        if (!o["global_degree"].is_boolean()) throw ConfigError("options.global_degree", "expected a boolean");
        opt.global_degree = o["global_degree"];
    }
    if (o.contains("k1_probes")) {
        opt.k1_probes = get_int(o["k1_probes"], "options.k1_probes");
        if (opt.k1_probes < 1) throw ConfigError("options.k1_probes", "must be at least 1");
    }
    if (o.contains("seed_bubble")) {
        const json& b = o["seed_bubble"];
        if (!b.is_object()) throw ConfigError("options.seed_bubble", "expected {mu, xi}");
        reject_unknown(b, "options.seed_bubble", {"mu", "xi"});
        if (!b.contains("mu") || !b.contains("xi")) throw ConfigError("options.seed_bubble", "needs mu and xi");
        const double mu = get_number(b["mu"], "options.seed_bubble.mu");
        if (!(mu > 0.0)) throw ConfigError("options.seed_bubble.mu", "must be positive");
        opt.seed_bubble = make_bubble(cfg.params, mu, get_point(b["xi"], "options.seed_bubble.xi", n));
    }
    if (o.contains("inputs")) {
        if (!o["inputs"].is_array()) throw ConfigError("options.inputs", "expected an array of directories");
        for (std::size_t i = 0; i < o["inputs"].size(); ++i) {
            if (!o["inputs"][i].is_string()) {
                throw ConfigError("options.inputs[" + std::to_string(i) + "]", "expected a string");
            }
            opt.inputs.push_back(o["inputs"][i]);
        }
    }
}

RunConfig parse_config(const json& j) {
    if (!j.is_object()) throw ConfigError("<root>", "expected a JSON object");
    reject_unknown(j, "", {"command", "params", "K", "options", "output_dir", "seed", "threads"});
    RunConfig cfg;
    if (!j.contains("command") || !j["command"].is_string()) throw ConfigError("command", "required string");
    cfg.command = j["command"];
    if (std::find(kCommands.begin(), kCommands.end(), cfg.command) == kCommands.end()) {
        throw ConfigError("command", "unknown command '" + cfg.command + "'");
    }
    if (!j.contains("params") || !j["params"].is_object()) throw ConfigError("params", "required object {n, gamma}");
    reject_unknown(j["params"], "params", {"n", "gamma"});
    if (!j["params"].contains("n")) throw ConfigError("params.n", "required");
    if (!j["params"].contains("gamma")) throw ConfigError("params.gamma", "required");
    const int n = get_int(j["params"]["n"], "params.n");
    const double gamma = get_number(j["params"]["gamma"], "params.gamma");
    try {
        cfg.params = make_params(n, gamma);
    } catch (const ValidationError& e) {
        throw ConfigError("params", e.what());
    }
    const bool needs_K = cfg.command != "verify-bubble" && cfg.command != "report";
    if (j.contains("K")) {
        cfg.K_spec = j["K"];
        parse_K(j["K"], cfg);
    } else if (needs_K) {
        throw ConfigError("K", "required for '" + cfg.command + "'");
    }
    if (j.contains("options")) parse_options(j["options"], cfg);
    if (cfg.command == "report" && cfg.options.inputs.empty()) {
        throw ConfigError("options.inputs", "required for 'report': the sweep output directories to merge");
    }
    if ((cfg.command == "solve" || cfg.command == "sweep") && n > 2) {
        throw ConfigError("params.n", "the sphere solver supports n = 1 and n = 2");
    }
    if (j.contains("output_dir")) {
        if (!j["output_dir"].is_string()) throw ConfigError("output_dir", "expected a string");
        cfg.output_dir = j["output_dir"].get<std::string>();
    }
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) throw ConfigError("seed", "expected a nonnegative integer");
        cfg.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("threads")) {
        const int t = get_int(j["threads"], "threads");
        if (t < 1) throw ConfigError("threads", "must be at least 1");
        cfg.threads = static_cast<unsigned>(t);
    }
    return cfg;
}

// ---- output helpers --------------------------------------------------------

ojson num(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

ojson point_json(const PointN& p) {
    ojson a = ojson::array();
    for (int i = 0; i < p.size(); ++i) a.push_back(p[i]);
    return a;
}

ojson bubble_json(const Bubble& b) {
    ojson j;
    j["mu"] = b.mu;
    j["xi"] = point_json(b.xi);
    return j;
}

std::string fmt(double v) {
    std::ostringstream s;
    s << std::setprecision(12) << v;
    return s.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text;
}

struct Outcome {
    int exit_code = kExitOk;
    std::string status = "ok";
    ojson summary_fields = ojson::object();
    ojson result = ojson::object();
    std::vector<std::string> report_lines;
    std::vector<std::string> warnings;
    std::vector<std::string> artifacts;
    std::vector<std::pair<std::string, std::string>> files;  // name, contents
};

Box search_box(const RunConfig& cfg) {
    const int n = cfg.params.n;
    const double w = cfg.options.xi_half_width > 0.0 ? cfg.options.xi_half_width : 2.0 * cfg.K.eta;
    Box box;
    box.lower = PointN::Constant(n + 1, -w);
    box.upper = PointN::Constant(n + 1, w);
    box.lower[0] = cfg.options.mu_min;
    box.upper[0] = cfg.options.mu_max;
    return box;
}

ApplicabilityOptions applicability_options(const RunConfig& cfg) {
    ApplicabilityOptions opt;
    opt.k1.seed = cfg.seed;
    opt.k1.probes_per_shell = cfg.options.k1_probes;
    opt.radius = cfg.options.radius;
    opt.global_degree = cfg.options.global_degree;
    return opt;
}

// ---- commands --------------------------------------------------------------

void run_check_k(const RunConfig& cfg, Outcome& out) {
    const ConditionReport rep = theorem_applicability(cfg.K, cfg.params, applicability_options(cfg));
    out.summary_fields["verdict"] = rep.verdict;
    out.result = to_json(rep);
    out.report_lines.push_back(report_text(rep));
    std::ostringstream csv;
    csv << "index";
    for (int i = 0; i < cfg.params.n; ++i) csv << ",xi" << i + 1;
    csv << ",deg_loc,laplacian,beta,A,A_sign,route,verified\n";
    for (std::size_t k = 0; k < rep.crit_set.size(); ++k) {
        const auto& c = rep.crit_set[k];
        csv << k;
        for (int i = 0; i < c.xi.size(); ++i) csv << "," << fmt(c.xi[i]);
        csv << "," << c.local_degree << "," << fmt(c.laplacian) << "," << fmt(c.beta.beta) << ","
            << (std::isfinite(c.beta.A) ? fmt(c.beta.A) : "") << "," << c.beta.A_sign << "," << c.beta.route << ","
            << (c.beta.verified ? 1 : 0) << "\n";
    }
    out.files.emplace_back("critical_points.csv", csv.str());
    if (rep.verdict == "applicable") {
        out.exit_code = kExitOk;
    } else if (rep.verdict == "not-applicable") {
        out.exit_code = kExitHypothesis;
        out.status = "hypothesis-not-satisfied";
    } else {
        out.exit_code = kExitError;
        out.status = "inconclusive";
    }
}

void run_landscape(const RunConfig& cfg, Outcome& out) {
    const ReducedFunctional rf(cfg.K, cfg.params, ApplicabilityOptions{}.quadrature);
    const Box box = search_box(cfg);
    const auto rows = landscape_scan(rf, box, cfg.options.resolution);
    out.files.emplace_back("landscape.csv", landscape_csv(rows, cfg.params.n));
    double gmin = INFINITY, gmax = -INFINITY, smallest = INFINITY;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        gmin = std::min(gmin, rows[i].gamma);
        gmax = std::max(gmax, rows[i].gamma);
        if (rows[i].grad_norm < smallest) {
            smallest = rows[i].grad_norm;
            arg = i;
        }
    }
    out.result["box"] = {{"lower", point_json(box.lower)}, {"upper", point_json(box.upper)}};
    out.result["resolution"] = cfg.options.resolution;
    out.result["rows"] = rows.size();
    out.result["gamma_min"] = num(gmin);
    out.result["gamma_max"] = num(gmax);
    if (!rows.empty()) {
        out.result["smallest_gradient"] = {{"mu", rows[arg].mu}, {"xi", point_json(rows[arg].xi)},
                                           {"grad_norm", num(smallest)}};
    }
    out.report_lines.push_back("landscape: " + std::to_string(rows.size()) + " grid points, Gamma in [" + fmt(gmin) +
                               ", " + fmt(gmax) + "], smallest |Gamma'| = " + fmt(smallest));
}

void run_degree(const RunConfig& cfg, Outcome& out) {
    const int n = cfg.params.n;
    const ApplicabilityOptions app;
    // deg(K', B_R^n, 0)
    MapUnderTest kmap{n, [&](const PointN& x) { return cfg.K.gradient(x); }, std::nullopt};
    const double R = cfg.options.radius > 0.0 ? cfg.options.radius : 2.0 * cfg.K.eta;
    DegreeOptions kopt;
    kopt.cross_check = false;
    const DegreeResult kd = ball_degree(kmap, PointN::Zero(n), R, kopt);
    ojson k;
    k["radius"] = R;
    k["degree"] = kd.degree;
    k["certified"] = kd.certified;
    k["expected_if_K1"] = (n % 2 == 0) ? 1 : -1;
    k["min_boundary_norm"] = num(kd.min_boundary_norm);
    out.result["K_gradient_ball"] = k;

    const ReducedFunctional rf(cfg.K, cfg.params, app.quadrature);
    const Box box = search_box(cfg);
    const DegreeResult gd = brouwer_degree(reduced_gradient_map(rf), box, app.degree);
    ojson g;
    g["box"] = {{"lower", point_json(box.lower)}, {"upper", point_json(box.upper)}};
    g["degree"] = gd.degree;
    g["certified"] = gd.certified;
    g["min_boundary_norm"] = num(gd.min_boundary_norm);
    g["evaluations"] = gd.evaluations;
    out.result["reduced_gradient_box"] = g;
    out.report_lines.push_back("deg(K', B_R, 0) = " + std::to_string(kd.degree) + " (R = " + fmt(R) + ", " +
                               (kd.certified ? "certified" : "not certified") + ")");
    out.report_lines.push_back("deg(Gamma', box, 0) = " + std::to_string(gd.degree) + " (" +
                               (gd.certified ? "certified" : "not certified") + ")");
    if (!kd.certified || !gd.certified) {
        out.exit_code = kExitError;
        out.status = "inconclusive";
    }
}

void run_verify_bubble(const RunConfig& cfg, Outcome& out) {
    const auto bc = bubble_constant(cfg.params);
    const double rel = std::abs(bc.Lambda / bc.closed_form - 1.0);
    out.result["Lambda"] = bc.Lambda;
    out.result["alpha"] = bc.alpha;
    out.result["closed_form"] = bc.closed_form;
    out.result["spread"] = bc.spread;
    out.result["relative_error"] = rel;
    const double residual = std::max(bc.spread, rel);
    out.result["residual"] = residual;
    std::ostringstream line;
    line << "residual " << std::scientific << std::setprecision(3) << residual << " (spread " << bc.spread
         << ", Lambda vs closed form " << rel << ")";
    out.report_lines.push_back(line.str());
    std::cout << line.str() << "\n";
    bool ok = residual <= 1e-6;
    if (cfg.params.n <= 2) {
        const int L = cfg.options.L > 0 ? cfg.options.L : (cfg.params.n == 1 ? 64 : 24);
        const auto rep = kernel_check(linearized_operator(standard_bubble(cfg.params), L));
        ojson k;
        k["L"] = L;
        k["dim"] = rep.dim;
        k["expected_dim"] = rep.expected_dim;
        k["max_angle"] = rep.angles.empty() ? ojson(nullptr) : ojson(*std::max_element(rep.angles.begin(), rep.angles.end()));
        k["negatives"] = rep.negatives;
        k["gap_ratio"] = num(rep.gap_ratio);
        out.result["kernel"] = k;
        out.report_lines.push_back("kernel dimension " + std::to_string(rep.dim) + " (expected " +
                                   std::to_string(rep.expected_dim) + ")");
        ok = ok && rep.dim == rep.expected_dim;
    }
    if (!ok) {
        out.exit_code = kExitError;
        out.status = "check-failed";
    }
}

Bubble solver_seed(const RunConfig& cfg, Outcome& out) {
    if (cfg.options.seed_bubble) return *cfg.options.seed_bubble;
    const int n = cfg.params.n;
    const double w = 2.0 * cfg.K.eta;
    const auto k2 = check_K2(cfg.K, Box{PointN::Constant(n, -w), PointN::Constant(n, w)});
    const ReducedFunctional rf(cfg.K, cfg.params, ApplicabilityOptions{}.quadrature);
    std::vector<PointN> seeds;
    for (const auto& cp : k2.search.points) {
        for (double mu : {0.25, 0.5, 1.0}) {
            PointN s(n + 1);
            s[0] = mu;
            s.tail(n) = cp.x;
            seeds.push_back(s);
        }
    }
    if (seeds.empty()) throw ConvergenceError("no critical point of K to seed the reduced gradient search");
    const auto zeros = reduced_zeros(rf, search_box(cfg), seeds);
    if (zeros.empty()) throw ConvergenceError("no zero of the reduced gradient found from the critical-point seeds");
    out.warnings.push_back("seed bubble taken from a zero of Gamma' (" + std::to_string(zeros.size()) + " found)");
    return zeros.front();
}

SolverOptions solver_options(const RunConfig& cfg) {
    SolverOptions opt;
    opt.tol = cfg.options.tol;
    opt.max_iterations = cfg.options.max_iterations;
    return opt;
}

void run_solve(const RunConfig& cfg, Outcome& out) {
    const Bubble seed = solver_seed(cfg, out);
    const auto basis = make_basis(cfg.params.n, cfg.options.L);
    const SolutionRecord rec =
        solve_newton(lift_bubble(seed, basis), cfg.options.epsilon, cfg.K, cfg.params, solver_options(cfg), seed);
    const RieszCheck riesz = riesz_residual(rec.field, rec.epsilon, cfg.K, cfg.params);
    out.result["seed_bubble"] = bubble_json(seed);
    out.result["solution"] = to_json(rec);
    out.result["riesz"] = {{"residual", num(riesz.residual)}, {"available", riesz.available}, {"note", riesz.note}};
    out.files.emplace_back("solution.csv", field_csv(rec.field));
    out.report_lines.push_back("eps = " + fmt(rec.epsilon) + ": converged in " + std::to_string(rec.newton_iters) +
                               " Newton steps, residual " + fmt(rec.residual_L2) + ", min " +
                               fmt(rec.positivity_margin) + ", distance to Z " + fmt(rec.distance_to_Z));
    out.report_lines.push_back("Riesz residual " + fmt(riesz.residual) + (riesz.available ? "" : " (" + riesz.note + ")"));
}

std::string sweep_csv(const SweepResult& s, int n, bool fit_row) {
    std::ostringstream csv;
    csv << "epsilon,distance_to_Z,residual_L2,newton_iters,mu";
    for (int i = 0; i < n; ++i) csv << ",xi" << i + 1;
    csv << ",error\n";
    for (const auto& row : s.rows) {
        csv << fmt(row.epsilon) << ",";
        if (row.record) {
            const auto& r = *row.record;
            csv << fmt(r.distance_to_Z) << "," << fmt(r.residual_L2) << "," << r.newton_iters << ","
                << fmt(r.nearest_bubble.mu);
            for (int i = 0; i < n; ++i) csv << "," << fmt(r.nearest_bubble.xi[i]);
            csv << ",\n";
        } else {
            csv << ",,,";
            for (int i = 0; i < n; ++i) csv << ",";
            std::string err = row.error;
            std::replace(err.begin(), err.end(), ',', ';');
            std::replace(err.begin(), err.end(), '\n', ' ');
            csv << "," << err << "\n";
        }
    }
    if (fit_row && std::isfinite(s.slope)) csv << "fit,slope=" << fmt(s.slope) << ",C=" << fmt(s.constant) << ",,\n";
    return csv.str();
}

void run_sweep(const RunConfig& cfg, Outcome& out) {
    const Bubble seed = solver_seed(cfg, out);
    const SweepResult s = continuation_sweep(cfg.K, cfg.params, cfg.options.eps_list, seed, cfg.options.L,
                                             solver_options(cfg));
    ojson rows = ojson::array();
    for (const auto& row : s.rows) {
        ojson r;
        r["epsilon"] = row.epsilon;
        r["converged"] = row.record.has_value();
        r["distance_to_Z"] = row.record ? num(row.record->distance_to_Z) : ojson(nullptr);
        r["residual_L2"] = row.record ? num(row.record->residual_L2) : ojson(nullptr);
        r["newton_iters"] = row.record ? ojson(row.record->newton_iters) : ojson(nullptr);
        r["error"] = row.error;
        rows.push_back(r);
        out.report_lines.push_back("eps = " + fmt(row.epsilon) + ": " +
                                   (row.record ? "distance " + fmt(row.record->distance_to_Z) : row.error));
    }
    out.result["seed_bubble"] = bubble_json(seed);
    out.result["rows"] = rows;
    out.result["slope"] = num(s.slope);
    out.result["C"] = num(s.constant);
    out.result["fitted"] = s.fitted;
    out.result["monotone"] = s.monotone;
    out.files.emplace_back("sweep.csv", sweep_csv(s, cfg.params.n, false));
    out.report_lines.push_back("log-log slope " + fmt(s.slope) + ", C = " + fmt(s.constant) + " over " +
                               std::to_string(s.fitted) + " rows");
    if (s.fitted < 2) {
        out.exit_code = kExitError;
        out.status = "error";
        out.report_lines.push_back("fewer than two converged rows; no fit");
    }
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream s(line);
    std::string cell;
    while (std::getline(s, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

void run_report(const RunConfig& cfg, Outcome& out) {
    std::vector<fs::path> dirs;
    for (const auto& d : cfg.options.inputs) dirs.emplace_back(d);
    std::vector<std::string> missing;
    for (const auto& d : dirs) {
        if (!fs::exists(d / "sweep.csv")) missing.push_back((d / "sweep.csv").string());
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += "\n  " + m;
        throw std::runtime_error("missing artifacts:" + list);
    }
    // Merge the rows, refit over every converged eps > 0.
    std::ostringstream merged;
    merged << "source,epsilon,distance_to_Z,residual_L2,newton_iters\n";
    std::vector<double> lx, ly;
    std::size_t rows = 0;
    for (const auto& d : dirs) {
        std::ifstream f(d / "sweep.csv");
        std::string line;
        std::getline(f, line);
        while (std::getline(f, line)) {
            if (line.empty() || line.rfind("fit", 0) == 0) continue;
            const auto cells = split_csv_line(line);
            if (cells.size() < 4) continue;
            merged << d.filename().string() << "," << cells[0] << "," << cells[1] << "," << cells[2] << "," << cells[3]
                   << "\n";
            ++rows;
            if (!cells[1].empty()) {
                const double e = std::stod(cells[0]), dist = std::stod(cells[1]);
                if (e > 0.0 && dist > 0.0) {
                    lx.push_back(std::log(e));
                    ly.push_back(std::log(dist));
                }
            }
        }
    }
    out.result["sources"] = dirs.size();
    out.result["rows"] = rows;
    if (lx.size() >= 2) {
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            mx += lx[i] / lx.size();
            my += ly[i] / ly.size();
        }
        double sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            sxx += (lx[i] - mx) * (lx[i] - mx);
            sxy += (lx[i] - mx) * (ly[i] - my);
        }
        const double slope = sxy / sxx, C = std::exp(my - slope * mx);
        merged << "fit,slope=" << fmt(slope) << ",C=" << fmt(C) << ",,\n";
        out.result["slope"] = slope;
        out.result["C"] = C;
        out.report_lines.push_back("merged " + std::to_string(rows) + " rows, slope " + fmt(slope) + ", C " + fmt(C));
    } else {
        out.result["slope"] = nullptr;
        out.result["C"] = nullptr;
        out.warnings.push_back("fewer than two converged rows with eps > 0; fit row omitted");
        out.report_lines.push_back("merged " + std::to_string(rows) + " rows, no fit");
    }
    out.files.emplace_back("report.csv", merged.str());
}

ojson params_json(const ProblemParams& p) {
    ojson j;
    j["n"] = p.n;
    j["gamma"] = p.gamma;
    j["p"] = p.p;
    return j;
}

int run(const RunConfig& cfg) {
    set_thread_count(cfg.threads);
    Outcome out;
    if (cfg.K_finite_differences) out.warnings.push_back("WARN: K given as a free expression; derivatives by finite differences");
    try {
        fs::create_directories(cfg.output_dir);
    } catch (const std::exception& e) {
        std::cerr << "cannot create output_dir '" << cfg.output_dir.string() << "': " << e.what() << "\n";
        return kExitError;
    }
    std::vector<std::string> errors;
    try {
        if (cfg.command == "check-k") run_check_k(cfg, out);
        else if (cfg.command == "landscape") run_landscape(cfg, out);
        else if (cfg.command == "degree") run_degree(cfg, out);
        else if (cfg.command == "verify-bubble") run_verify_bubble(cfg, out);
        else if (cfg.command == "solve") run_solve(cfg, out);
        else if (cfg.command == "sweep") run_sweep(cfg, out);
        else run_report(cfg, out);
    } catch (const std::exception& e) {
        out.exit_code = kExitError;
        out.status = "error";
        errors.push_back(e.what());
        out.report_lines.push_back(std::string("error: ") + e.what());
    }
    for (const auto& [name, text] : out.files) {
        write_file(cfg.output_dir / name, text);
        out.artifacts.push_back(name);
    }

    ojson s;
    s["schema_version"] = kSchemaVersion;
    s["command"] = cfg.command;
    s["status"] = out.status;
    s["exit_code"] = out.exit_code;
    s["params"] = params_json(cfg.params);
    s["K"] = cfg.K_label.empty() ? ojson(nullptr) : ojson(cfg.K_label);
    s["seed"] = cfg.seed;
    s["verdict"] = out.summary_fields.contains("verdict") ? out.summary_fields["verdict"] : ojson(nullptr);
    s["result"] = out.result;
    s["warnings"] = out.warnings;
    s["errors"] = errors;
    std::vector<std::string> artifacts = out.artifacts;
    artifacts.push_back("report.txt");
    artifacts.push_back("summary.json");
    std::sort(artifacts.begin(), artifacts.end());
    s["artifacts"] = artifacts;
    write_file(cfg.output_dir / "summary.json", s.dump(2) + "\n");

    std::ostringstream rep;
    rep << "qgamma " << cfg.command << "  n = " << cfg.params.n << ", gamma = " << fmt(cfg.params.gamma);
    if (!cfg.K_label.empty()) rep << ", K = " << cfg.K_label;
    rep << "\n";
    for (const auto& w : out.warnings) rep << w << "\n";
    for (const auto& l : out.report_lines) rep << l << (l.empty() || l.back() != '\n' ? "\n" : "");
    rep << "status: " << out.status << " (exit " << out.exit_code << ")\n";
    write_file(cfg.output_dir / "report.txt", rep.str());
    std::cout << rep.str();
    return out.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Perturbative solver for the prescribed fractional curvature problem"};
    std::string config_path, output_dir, command, K_name;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<int> n;
    std::optional<double> gamma;
    std::vector<std::string> inputs;
    app.add_option("command", command, "check-k, landscape, degree, verify-bubble, solve, sweep or report")
        ->check(CLI::IsMember(kCommands));
    app.add_option("--config,-c", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--output-dir,-o", output_dir, "directory for summary.json, report.txt and CSVs");
    app.add_option("--seed", seed, "seed for randomized probing");
    app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--n", n, "dimension (overrides params.n)");
    app.add_option("--gamma", gamma, "fractional order (overrides params.gamma)");
    app.add_option("--K", K_name, "built-in K (overrides K)");
    app.add_option("--input", inputs, "sweep output directory to merge (report; repeatable)");
    CLI11_PARSE(app, argc, argv);

    json j = json::object();
    if (!config_path.empty()) {
        std::ifstream f(config_path);
        try {
            j = json::parse(f);
        } catch (const json::parse_error& e) {
            std::cerr << "config error: " << config_path << " is not valid JSON: " << e.what() << "\n";
            return kExitError;
        }
    }
    if (!j.is_object()) {
        std::cerr << "config error at '<root>': expected a JSON object\n";
        return kExitError;
    }
    if (!command.empty()) j["command"] = command;
    if (n) j["params"]["n"] = *n;
    if (gamma) j["params"]["gamma"] = *gamma;
    if (!K_name.empty()) j["K"] = K_name;
    if (!output_dir.empty()) j["output_dir"] = output_dir;
    if (seed) j["seed"] = *seed;
    if (threads) j["threads"] = *threads;
    if (!inputs.empty()) j["options"]["inputs"] = inputs;

    RunConfig cfg;
    try {
        cfg = parse_config(j);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitError;
    }
    return run(cfg);
}
