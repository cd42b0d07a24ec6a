#include "eqprior/term.hpp"

#include <algorithm>
#include <vector>

#include "eqprior/errors.hpp"

namespace eqprior {

std::string leaf_text(Op op, std::uint32_t value) {
  switch (op) {
    case Op::Var:
      return value == 0 ? std::string("x") : "x" + std::to_string(value);
    case Op::Param:
      return value == kAnonymousParam ? std::string("a") : "a" + std::to_string(value);
    case Op::Const:
      return std::to_string(value);
    default:
      return std::string(info(op).name);
  }
}

TermNode::TermNode(Op op, std::uint32_t value, Term lhs, Term rhs)
    : op_(op), value_(value), kids_{std::move(lhs), std::move(rhs)} {
  const int n = eqprior::arity(op_);
  for (int i = 0; i < 2; ++i) {
    if ((i < n) != static_cast<bool>(kids_[static_cast<std::size_t>(i)])) {
      throw std::invalid_argument("child count does not match arity of '" +
                                  std::string(info(op_).name) + "'");
    }
  }
  size_ = 1;
  has_var_ = op_ == Op::Var;
  has_param_ = op_ == Op::Param;
  if (n == 0) {
    text_ = leaf_text(op_, value_);
    return;
  }
  text_ = info(op_).name;
  text_ += '(';
  for (int i = 0; i < n; ++i) {
    const auto& k = kids_[static_cast<std::size_t>(i)];
    size_ += k->size_;
    has_var_ = has_var_ || k->has_var_;
    has_param_ = has_param_ || k->has_param_;
    if (i) text_ += ',';
    text_ += k->text_;
  }
  text_ += ')';
}

Term make_var(std::uint32_t index) {
  return std::make_shared<const TermNode>(Op::Var, index, nullptr, nullptr);
}

Term make_param(std::uint32_t name) {
  return std::make_shared<const TermNode>(Op::Param, name, nullptr, nullptr);
}

Term make_const(std::uint32_t value) {
  if (value == 0) throw DataError("integer constants must be >= 1");
  return std::make_shared<const TermNode>(Op::Const, value, nullptr, nullptr);
}

Term make_unary(Op op, Term arg) {
  return std::make_shared<const TermNode>(op, 0, std::move(arg), nullptr);
}

Term make_binary(Op op, Term lhs, Term rhs) {
  return std::make_shared<const TermNode>(op, 0, std::move(lhs), std::move(rhs));
}

Term make_node(Op op, Term lhs, Term rhs) {
  return std::make_shared<const TermNode>(op, 0, std::move(lhs), std::move(rhs));
}

namespace {

const Term& anonymous_param() {
  static const Term p = make_param();
  return p;
}

void gather(Op op, const Term& t, std::vector<Term>& out) {
  if (t->op() == op) {
    gather(op, t->child(0), out);
    gather(op, t->child(1), out);
  } else {
    out.push_back(t);
  }
}

}  // namespace

Term canonical_node(Op op, const Term& lhs, const Term& rhs) {
  const int n = arity(op);
  if (n == 0) throw std::invalid_argument("canonical_node needs an operator, not a leaf");
  const bool has_var = lhs->has_var() || (n == 2 && rhs->has_var());
  const bool has_param = lhs->has_param() || (n == 2 && rhs->has_param());
  if (!has_var && has_param) return anonymous_param();

  if (op == Op::Neg && lhs->op() == Op::Neg) return lhs->child(0);
  if (n == 1) return make_unary(op, lhs);

  // u - a and u / a are reparameterizations of a + u and a * u.
  if (op == Op::Sub && !rhs->has_var() && rhs->has_param()) return canonical_node(Op::Add, lhs, rhs);
  if (op == Op::Div && !rhs->has_var() && rhs->has_param()) return canonical_node(Op::Mul, lhs, rhs);
  if (!info(op).commutative) return make_binary(op, lhs, rhs);

  std::vector<Term> operands;
  gather(op, lhs, operands);
  gather(op, rhs, operands);

  // Any variable-free operand combined with a free parameter is absorbed by it.
  const bool any_param = std::any_of(operands.begin(), operands.end(),
                                     [](const Term& t) { return !t->has_var() && t->has_param(); });
  if (any_param) {
    std::erase_if(operands, [](const Term& t) { return !t->has_var(); });
    operands.push_back(anonymous_param());
  }
  std::stable_sort(operands.begin(), operands.end(),
                   [](const Term& a, const Term& b) { return a->text() < b->text(); });
  Term acc = operands.front();
  for (std::size_t i = 1; i < operands.size(); ++i) acc = make_binary(op, acc, operands[i]);
  return acc;
}

Term canonicalize(const Term& t) {
  switch (t->arity()) {
    case 0:
      if (t->op() == Op::Param) return anonymous_param();
      return t;
    case 1:
      return canonical_node(t->op(), canonicalize(t->child(0)));
    default:
      return canonical_node(t->op(), canonicalize(t->child(0)), canonicalize(t->child(1)));
  }
}

}  // namespace eqprior
