#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "eqprior/exprtree.hpp"
#include "eqprior/ops.hpp"

namespace eqprior {

struct ParseOptions {
  /// Declared variable names, mapped to indices in order. When empty, "x" and
  /// "x0".."x10" are variables.
  std::vector<std::string> variables;
  /// Integer literals become parameters instead of integer constants.
  bool integers_as_parameters = false;
  /// "pi" and "e" become parameters (they set scales, like fitted parameters).
  bool named_constants = true;
};

/// Parses infix text: + - * / ^ (or **), unary minus, function-call syntax for
/// operators ("sin(x)", "pow(x,a)", "+(a,x)"), variables, parameters a / a0..,
/// decimal literals (always parameters) and integer literals. Negative
/// literals become neg(literal). Operators outside the basis are rejected;
/// leaves and the sign operator are always accepted.
ExprTree parse_expression(std::string_view text, const OperatorBasis& basis,
                          const ParseOptions& opts = {});

/// Same grammar, returning the shared term.
Term parse_term(std::string_view text, const OperatorBasis& basis, const ParseOptions& opts,
                std::vector<double>* param_hints = nullptr);

}  // namespace eqprior
