#pragma once

#include <Eigen/Dense>
#include <functional>

namespace qgamma {

/// Point or vector in R^d with d <= 4, stored inline (no heap allocation).
using PointN = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 4, 1>;
/// Small dense matrix (Jacobians of maps R^d -> R^d, Hessians of K).
using MatrixN = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 4, 4>;

using ScalarField = std::function<double(const PointN&)>;
using VectorField = std::function<PointN(const PointN&)>;
using MatrixField = std::function<MatrixN(const PointN&)>;

/// Axis-aligned box [lower, upper] in R^d.
struct Box {
    PointN lower;
    PointN upper;
};

}  // namespace qgamma
