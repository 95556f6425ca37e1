#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qgamma/types.hpp"

namespace qgamma {

/// A continuous map R^d -> R^d, d <= 4.
struct MapUnderTest {
    int dim = 0;
    VectorField eval;
    std::optional<double> lipschitz_hint;
};

struct DegreeOptions {
    double tol = 1e-10;        ///< evaluation error model: sign margins must exceed this
    int min_depth = 2;         ///< faces are split at least this often
    int max_depth = 24;        ///< splits per reduction level
    bool cross_check = true;   ///< run the mollified-integral route as well
    int integral_max_depth = 14;
};

struct DegreeResult {
    int degree = 0;
    bool certified = false;
    double min_boundary_norm = 0.0;
    int subdivision_depth = 0;
    std::size_t evaluations = 0;
    std::optional<double> integral_estimate;  ///< mollified volume integral, when run
    bool routes_agree = true;
};

/// Degree of m on the box by face reduction: the degree is the signed sum
/// over faces of the degree of the remaining components on the part of the
/// face where the first component is positive, recursively down to
/// intervals. A face is split only where that sign is undecided; a cell is
/// decided when a component keeps one sign with margin > tol at its corners
/// and centre, and the spread of those samples is below a quarter of their
/// smallest magnitude.
/// Throws DegreeError when the boundary carries a zero or a cell stays
/// undecided at max_depth.
DegreeResult brouwer_degree(const MapUnderTest& m, const Box& box, const DegreeOptions& opt = {});

/// int phi_delta(m(x)) det Dm(x) dx with a smooth bump of width delta,
/// adaptive cubature with central-difference Jacobians.
double mollified_degree_integral(const MapUnderTest& m, const Box& box, double delta, int max_depth = 14);

/// Degree on the ball |x - center| <= radius, with the map masked to the
/// ball: the boundary of the enclosing cube is pulled onto the sphere.
DegreeResult ball_degree(const MapUnderTest& m, const PointN& center, double radius, const DegreeOptions& opt = {});

/// Fast path: if <m(x), x - center> < 0 at every probe of the sphere, the
/// degree on the ball is (-1)^d. Returns nullopt when some probe fails.
std::optional<int> inward_shortcut(const MapUnderTest& m, const PointN& center, double radius, int probes_per_axis = 16);

/// Degree on the cube of half-width radius around an isolated zero.
int local_degree(const MapUnderTest& m, const PointN& zero, double radius, const DegreeOptions& opt = {});

/// Central-difference Jacobian.
MatrixN fd_jacobian(const MapUnderTest& m, const PointN& x, double step);

struct CritPoint {
    PointN x;
    double residual = 0.0;
    int local_degree = 0;
    double jacobian_det = 0.0;
    double isolation_radius = 0.0;
};

struct CritSearch {
    std::vector<CritPoint> points;
    std::vector<std::string> diagnostics;
    int seeds_tried = 0;
    int seeds_converged = 0;
    int uncertified = 0;  ///< converged candidates whose local degree could not be certified
};

struct CritOptions {
    double residual_tol = 1e-11;
    int max_iterations = 60;
    double cluster_rel = 1e-6;   ///< merge radius relative to diam(box)
    DegreeOptions degree;
};

/// Damped Newton from each seed; zeros inside the box are clustered,
/// certified by local_degree and returned in lexicographic order. With no
/// seeds, the centres of the cells surviving exclusion_seeds are used.
CritSearch crit_points(const MapUnderTest& m, const Box& box, const std::vector<PointN>& seeds = {},
                       const CritOptions& opt = {});

/// Bisection of the box down to max_depth; from min_depth on, a cell is
/// dropped when some component keeps one sign with margin on its corners and
/// centre. Returns the centres of the surviving finest cells.
std::vector<PointN> exclusion_seeds(const MapUnderTest& m, const Box& box, int min_depth, int max_depth);

/// Tensor grid of seeds, per_axis points per axis at cell centres.
std::vector<PointN> grid_seeds(const Box& box, int per_axis);

}  // namespace qgamma
