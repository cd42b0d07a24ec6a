#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace eqprior {

enum class Op : std::uint8_t {
  // nullary
  Var,
  Param,
  Const,
  // unary
  Neg,
  Sqrt,
  Square,
  Cube,
  Inv,
  Exp,
  Log,
  Sin,
  Cos,
  Tanh,
  Arcsin,
  Arccos,
  Abs,
  // binary
  Add,
  Sub,
  Mul,
  Div,
  Pow,
};

enum class LeafRole : std::uint8_t { None, Variable, Parameter, IntegerConstant };

struct OpInfo {
  Op op;
  std::string_view name;   // spelling used in prefix form and basis lists
  std::string_view token;  // word seen by the language model
  int arity;
  bool commutative;
  LeafRole role;
};

const OpInfo& info(Op op);
std::span<const OpInfo> all_ops();

/// Looks up an operator by name, accepting common aliases ("ln", "asin", "^", "**").
std::optional<Op> op_from_name(std::string_view name);

inline int arity(Op op) { return info(op).arity; }
inline std::string_view token_of(Op op) { return info(op).token; }

/// A set of operators from which expressions are built or against which they
/// are validated. Order is preserved and determines enumeration order.
class OperatorBasis {
 public:
  OperatorBasis() = default;
  explicit OperatorBasis(std::vector<Op> ops);

  /// Comma separated operator names, or one of the preset names
  /// ("esr", "rational", "corpus", "all"). Presets may be joined with '+'.
  static OperatorBasis parse(std::string_view text);
  static OperatorBasis preset(std::string_view name);
  static OperatorBasis all();

  std::span<const Op> ops() const { return ops_; }
  std::vector<Op> with_arity(int n) const;
  bool contains(Op op) const;
  bool empty() const { return ops_.empty(); }

  /// Throws unless the basis has a variable and a parameter leaf.
  void require_enumerable() const;

  /// Distinct language-model tokens produced by trees over this basis.
  std::vector<std::string> tokens() const;
  std::string to_string() const;

  OperatorBasis merged(const OperatorBasis& other) const;

 private:
  std::vector<Op> ops_;
};

}  // namespace eqprior
