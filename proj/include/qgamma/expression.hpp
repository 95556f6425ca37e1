#pragma once

#include <string>

#include "qgamma/types.hpp"

namespace qgamma {

/// Parses a scalar expression in the coordinates of R^n.
///
/// Grammar: numbers, + - * / ^ (right associative), parentheses, variables
/// x1..xn (x, y, z as aliases) and r = |x|, functions exp log sqrt abs sin
/// cos tanh and pow(a, b). Throws ValidationError with the offending
/// position on a syntax error or unknown name.
ScalarField parse_expression(const std::string& text, int n);

}  // namespace qgamma
