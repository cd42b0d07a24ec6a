#include "eqprior/exprtree.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <stdexcept>

#include "eqprior/errors.hpp"

namespace eqprior {

namespace {

NodeId append(const Term& t, std::vector<Node>& nodes, std::vector<NodeId>& params) {
  Node node{t->op(), t->value()};
  for (int i = 0; i < t->arity(); ++i) {
    node.kids[static_cast<std::size_t>(i)] = append(t->child(i), nodes, params);
  }
  const auto id = static_cast<NodeId>(nodes.size());
  for (int i = 0; i < t->arity(); ++i) nodes[node.kids[static_cast<std::size_t>(i)]].parent = id;
  if (node.op == Op::Param) params.push_back(id);
  nodes.push_back(node);
  return id;
}

}  // namespace

ExprTree ExprTree::from_term(const Term& term, std::vector<double> param_hints) {
  if (!term) throw std::invalid_argument("empty expression");
  ExprTree tree;
  tree.nodes_.reserve(static_cast<std::size_t>(term->size()));
  std::vector<NodeId> leaves;
  append(term, tree.nodes_, leaves);

  const auto named = std::count_if(leaves.begin(), leaves.end(), [&](NodeId id) {
    return tree.nodes_[id].value != kAnonymousParam;
  });
  tree.param_slots_.assign(leaves.size(), kNoNode);
  if (named == 0) {
    for (std::size_t s = 0; s < leaves.size(); ++s) {
      tree.nodes_[leaves[s]].value = static_cast<std::uint32_t>(s);
      tree.param_slots_[s] = leaves[s];
    }
  } else if (static_cast<std::size_t>(named) == leaves.size()) {
    for (NodeId id : leaves) {
      const auto slot = tree.nodes_[id].value;
      if (slot >= leaves.size() || tree.param_slots_[slot] != kNoNode) {
        throw DataError("named parameters must be a0..a" + std::to_string(leaves.size() - 1) +
                        ", each used once");
      }
      tree.param_slots_[slot] = id;
    }
  } else {
    throw DataError("cannot mix named (a0, a1, ...) and anonymous (a) parameters");
  }

  if (!param_hints.empty() && param_hints.size() != leaves.size()) {
    throw std::invalid_argument("parameter hint count does not match parameter count");
  }
  tree.param_hints_ = std::move(param_hints);

  for (const auto& n : tree.nodes_) {
    if (n.op == Op::Var) tree.num_variables_ = std::max<std::size_t>(tree.num_variables_, n.value + 1);
  }
  return tree;
}

Term ExprTree::to_term() const {
  std::vector<Term> built(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    switch (arity(n.op)) {
      case 0:
        if (n.op == Op::Var) built[i] = make_var(n.value);
        else if (n.op == Op::Param) built[i] = make_param(n.value);
        else built[i] = make_const(n.value);
        break;
      case 1:
        built[i] = make_unary(n.op, built[n.kids[0]]);
        break;
      default:
        built[i] = make_binary(n.op, built[n.kids[0]], built[n.kids[1]]);
    }
  }
  return built.back();
}

std::size_t ExprTree::num_operators() const {
  std::set<Op> ops;
  for (const auto& n : nodes_) ops.insert(n.op);
  return ops.size();
}

std::vector<std::uint32_t> ExprTree::int_constants() const {
  std::vector<std::uint32_t> out;
  for (const auto& n : nodes_) {
    if (n.op == Op::Const) out.push_back(n.value);
  }
  return out;
}

std::vector<std::string> ExprTree::tokens() const {
  std::set<std::string> seen;
  for (const auto& n : nodes_) seen.emplace(token_of(n.op));
  return {seen.begin(), seen.end()};
}

std::string ExprTree::to_string() const { return to_term()->text(); }

std::string ExprTree::canonical() const { return canonicalize(to_term())->text(); }

bool ExprTree::is_right_child(NodeId id) const {
  const NodeId p = nodes_[id].parent;
  return p != kNoNode && arity(nodes_[p].op) == 2 && nodes_[p].kids[1] == id;
}

NodeId ExprTree::left_sibling(NodeId id) const {
  return is_right_child(id) ? nodes_[nodes_[id].parent].kids[0] : kNoNode;
}

std::string canonical_form(const ExprTree& tree) { return tree.canonical(); }

ExprTree canonical_tree(const ExprTree& tree) {
  return ExprTree::from_term(canonicalize(tree.to_term()));
}

// ---------------------------------------------------------------------------

std::string_view to_string(PhraseKind kind) { return kind == PhraseKind::Left ? "left" : "right"; }

std::vector<Phrase> extract_phrases(const ExprTree& tree, int n) {
  if (n < 1) throw std::invalid_argument("n-gram order must be >= 1");
  std::vector<Phrase> out;
  if (tree.complexity() == 0) return out;
  out.reserve(tree.complexity());
  const auto keep = static_cast<std::size_t>(n - 1);
  std::vector<std::string_view> ancestors;

  std::function<void(NodeId)> visit = [&](NodeId id) {
    Phrase ph;
    const std::size_t first = ancestors.size() > keep ? ancestors.size() - keep : 0;
    for (std::size_t i = first; i < ancestors.size(); ++i) ph.words.emplace_back(ancestors[i]);
    if (tree.is_right_child(id)) {
      ph.kind = PhraseKind::Right;
      ph.words.emplace_back(tree.token(tree.left_sibling(id)));
    } else {
      ph.kind = PhraseKind::Left;
    }
    ph.words.emplace_back(tree.token(id));
    out.push_back(std::move(ph));

    const auto& node = tree.node(id);
    ancestors.push_back(tree.token(id));
    for (int i = 0; i < arity(node.op); ++i) visit(node.kids[static_cast<std::size_t>(i)]);
    ancestors.pop_back();
  };
  visit(tree.root());
  return out;
}

// ---------------------------------------------------------------------------

Evaluator::Evaluator(const ExprTree& tree, EvalOptions opts)
    : tree_(&tree), opts_(opts), slots_(tree.complexity()) {}

namespace {

template <class F>
void unary(const auto& in, auto& out, F f) {
  if (in.scalar) {
    out.scalar = true;
    out.s = f(in.s);
  } else {
    out.scalar = false;
    out.a = in.a.unaryExpr(f);
  }
}

}  // namespace

const Eigen::ArrayXd& Evaluator::operator()(std::span<const double> theta,
                                            const Eigen::MatrixXd& x) {
  const auto& tree = *tree_;
  if (theta.size() != tree.num_params()) {
    throw std::invalid_argument("theta has " + std::to_string(theta.size()) +
                                " entries; tree has " + std::to_string(tree.num_params()) +
                                " parameters");
  }
  if (static_cast<std::size_t>(x.cols()) < tree.num_variables()) {
    throw std::invalid_argument("data has " + std::to_string(x.cols()) +
                                " columns; tree needs " + std::to_string(tree.num_variables()));
  }
  const bool abs_pow = opts_.abs_pow;
  const auto nodes = tree.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& n = nodes[i];
    Slot& out = slots_[i];
    switch (n.op) {
      case Op::Var:
        out.scalar = false;
        out.a = x.col(n.value).array();
        break;
      case Op::Param:
        out.scalar = true;
        out.s = theta[n.value];
        break;
      case Op::Const:
        out.scalar = true;
        out.s = static_cast<double>(n.value);
        break;
      case Op::Neg: unary(slots_[n.kids[0]], out, [](double v) { return -v; }); break;
      case Op::Sqrt: unary(slots_[n.kids[0]], out, [](double v) { return std::sqrt(v); }); break;
      case Op::Square: unary(slots_[n.kids[0]], out, [](double v) { return v * v; }); break;
      case Op::Cube: unary(slots_[n.kids[0]], out, [](double v) { return v * v * v; }); break;
      case Op::Inv: unary(slots_[n.kids[0]], out, [](double v) { return 1.0 / v; }); break;
      case Op::Exp: unary(slots_[n.kids[0]], out, [](double v) { return std::exp(v); }); break;
      case Op::Log: unary(slots_[n.kids[0]], out, [](double v) { return std::log(v); }); break;
      case Op::Sin: unary(slots_[n.kids[0]], out, [](double v) { return std::sin(v); }); break;
      case Op::Cos: unary(slots_[n.kids[0]], out, [](double v) { return std::cos(v); }); break;
      case Op::Tanh: unary(slots_[n.kids[0]], out, [](double v) { return std::tanh(v); }); break;
      case Op::Arcsin: unary(slots_[n.kids[0]], out, [](double v) { return std::asin(v); }); break;
      case Op::Arccos: unary(slots_[n.kids[0]], out, [](double v) { return std::acos(v); }); break;
      case Op::Abs: unary(slots_[n.kids[0]], out, [](double v) { return std::abs(v); }); break;
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
      case Op::Div:
      case Op::Pow: {
        const Slot& l = slots_[n.kids[0]];
        const Slot& r = slots_[n.kids[1]];
        auto f = [op = n.op, abs_pow](double u, double v) {
          switch (op) {
            case Op::Add: return u + v;
            case Op::Sub: return u - v;
            case Op::Mul: return u * v;
            case Op::Div: return u / v;
            default: return std::pow(abs_pow ? std::abs(u) : u, v);
          }
        };
        if (l.scalar && r.scalar) {
          out.scalar = true;
          out.s = f(l.s, r.s);
          break;
        }
        out.scalar = false;
        if (l.scalar) {
          const double s = l.s;
          switch (n.op) {
            case Op::Add: out.a = s + r.a; break;
            case Op::Sub: out.a = s - r.a; break;
            case Op::Mul: out.a = s * r.a; break;
            case Op::Div: out.a = s / r.a; break;
            default: out.a = r.a.unaryExpr([&](double v) { return f(s, v); });
          }
        } else if (r.scalar) {
          const double s = r.s;
          switch (n.op) {
            case Op::Add: out.a = l.a + s; break;
            case Op::Sub: out.a = l.a - s; break;
            case Op::Mul: out.a = l.a * s; break;
            case Op::Div: out.a = l.a / s; break;
            default: out.a = l.a.unaryExpr([&](double u) { return f(u, s); });
          }
        } else {
          switch (n.op) {
            case Op::Add: out.a = l.a + r.a; break;
            case Op::Sub: out.a = l.a - r.a; break;
            case Op::Mul: out.a = l.a * r.a; break;
            case Op::Div: out.a = l.a / r.a; break;
            default: out.a = l.a.binaryExpr(r.a, f);
          }
        }
        break;
      }
    }
  }
  const Slot& root = slots_.back();
  if (root.scalar) {
    out_.setConstant(x.rows(), root.s);
    return out_;
  }
  return root.a;
}

Eigen::VectorXd evaluate(const ExprTree& tree, std::span<const double> theta,
                         const Eigen::MatrixXd& x, EvalOptions opts) {
  Evaluator eval(tree, opts);
  return eval(theta, x).matrix();
}

}  // namespace eqprior
