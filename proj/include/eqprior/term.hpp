#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>

#include "eqprior/ops.hpp"

namespace eqprior {

class TermNode;

/// Immutable, structurally shared expression. Subterms may be shared between
/// many parents, which keeps exhaustive enumeration cheap.
using Term = std::shared_ptr<const TermNode>;

/// Parameter leaves created without a name carry this value.
inline constexpr std::uint32_t kAnonymousParam = 0xffffffffu;

class TermNode {
 public:
  TermNode(Op op, std::uint32_t value, Term lhs, Term rhs);

  Op op() const { return op_; }
  /// Variable index, integer constant value, or parameter name index.
  std::uint32_t value() const { return value_; }
  const Term& child(int i) const { return kids_[static_cast<std::size_t>(i)]; }
  int arity() const { return eqprior::arity(op_); }

  int size() const { return size_; }
  bool has_var() const { return has_var_; }
  bool has_param() const { return has_param_; }
  /// Prefix serialization, e.g. "+(a,*(a,x))".
  const std::string& text() const { return text_; }

 private:
  Op op_;
  std::uint32_t value_;
  std::array<Term, 2> kids_;
  int size_;
  bool has_var_;
  bool has_param_;
  std::string text_;
};

Term make_var(std::uint32_t index = 0);
Term make_param(std::uint32_t name = kAnonymousParam);
Term make_const(std::uint32_t value);
Term make_unary(Op op, Term arg);
Term make_binary(Op op, Term lhs, Term rhs);
Term make_node(Op op, Term lhs, Term rhs = nullptr);

/// Spelling of a leaf in prefix/infix text.
std::string leaf_text(Op op, std::uint32_t value);

/// Normal form used for deduplication:
///  - subtrees free of variables that contain a parameter collapse to one parameter;
///  - neg(neg(t)) -> t;
///  - t - a -> a + t and t / a -> a * t for a free parameter a;
///  - chains of + and * are flattened, surplus parameter and constant operands
///    merged into one parameter, operands sorted by their canonical text and
///    rebuilt left-deep.
/// Parameter names are dropped. The result is idempotent under canonicalize().
Term canonicalize(const Term& t);

/// Canonical combination of already-canonical children.
Term canonical_node(Op op, const Term& lhs, const Term& rhs = nullptr);

}  // namespace eqprior
