#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "eqprior/exprtree.hpp"
#include "eqprior/ops.hpp"
#include "eqprior/term.hpp"

namespace eqprior {

struct EnumerateOptions {
  int max_complexity = 1;
  /// Variable leaves x0..x{d-1}; a single variable prints as "x".
  int num_variables = 1;
};

/// Called once per canonical family, in order of discovery. The second
/// argument is the size of the raw trees that first produced it.
using TermVisitor = std::function<void(const Term&, int raw_size)>;

/// Builds every tree of up to max_complexity nodes over the basis, bottom up
/// from canonical subtrees, and reports each canonical form once. Integer
/// constants in the basis are ignored. Throws ConfigError for a basis with no
/// variable or parameter leaf, or max_complexity < 1.
void enumerate_terms(const OperatorBasis& basis, const EnumerateOptions& opts,
                     const TermVisitor& visit);

/// All canonical families sorted by (complexity, canonical string).
std::vector<ExprTree> generate(const OperatorBasis& basis, int max_complexity);
std::vector<ExprTree> generate(const OperatorBasis& basis, const EnumerateOptions& opts);

}  // namespace eqprior
