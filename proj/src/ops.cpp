#include "eqprior/ops.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "eqprior/errors.hpp"

namespace eqprior {
namespace {

constexpr std::array<OpInfo, 21> kOps = {{
    {Op::Var, "x", "x", 0, false, LeafRole::Variable},
    {Op::Param, "a", "a", 0, false, LeafRole::Parameter},
    {Op::Const, "const", "const", 0, false, LeafRole::IntegerConstant},
    {Op::Neg, "neg", "neg", 1, false, LeafRole::None},
    {Op::Sqrt, "sqrt", "sqrt", 1, false, LeafRole::None},
    {Op::Square, "square", "square", 1, false, LeafRole::None},
    {Op::Cube, "cube", "cube", 1, false, LeafRole::None},
    {Op::Inv, "inv", "inv", 1, false, LeafRole::None},
    {Op::Exp, "exp", "exp", 1, false, LeafRole::None},
    {Op::Log, "log", "log", 1, false, LeafRole::None},
    {Op::Sin, "sin", "sin", 1, false, LeafRole::None},
    {Op::Cos, "cos", "cos", 1, false, LeafRole::None},
    {Op::Tanh, "tanh", "tanh", 1, false, LeafRole::None},
    {Op::Arcsin, "arcsin", "arcsin", 1, false, LeafRole::None},
    {Op::Arccos, "arccos", "arccos", 1, false, LeafRole::None},
    {Op::Abs, "abs", "abs", 1, false, LeafRole::None},
    {Op::Add, "+", "+", 2, true, LeafRole::None},
    {Op::Sub, "-", "-", 2, false, LeafRole::None},
    {Op::Mul, "*", "*", 2, true, LeafRole::None},
    {Op::Div, "/", "/", 2, false, LeafRole::None},
    {Op::Pow, "pow", "pow", 2, false, LeafRole::None},
}};

struct Alias {
  std::string_view name;
  Op op;
};

constexpr std::array<Alias, 11> kAliases = {{
    {"ln", Op::Log},
    {"asin", Op::Arcsin},
    {"acos", Op::Arccos},
    {"^", Op::Pow},
    {"**", Op::Pow},
    {"times", Op::Mul},
    {"plus", Op::Add},
    {"minus", Op::Sub},
    {"div", Op::Div},
    {"sign", Op::Neg},
    {"int", Op::Const},
}};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace

const OpInfo& info(Op op) { return kOps[static_cast<std::size_t>(op)]; }

std::span<const OpInfo> all_ops() { return kOps; }

std::optional<Op> op_from_name(std::string_view name) {
  for (const auto& o : kOps) {
    if (o.name == name) return o.op;
  }
  for (const auto& a : kAliases) {
    if (a.name == name) return a.op;
  }
  return std::nullopt;
}

OperatorBasis::OperatorBasis(std::vector<Op> ops) : ops_(std::move(ops)) {
  std::set<Op> seen;
  for (Op op : ops_) {
    if (!seen.insert(op).second) {
      throw ConfigError("operator '" + std::string(info(op).name) + "' listed twice in basis");
    }
  }
}

OperatorBasis OperatorBasis::preset(std::string_view name) {
  if (name == "esr" || name == "benchmark") {
    return OperatorBasis({Op::Var, Op::Param, Op::Sqrt, Op::Square, Op::Sin, Op::Cos, Op::Add,
                          Op::Mul, Op::Sub, Op::Div, Op::Pow});
  }
  if (name == "rational" || name == "fig1") {
    return OperatorBasis(
        {Op::Var, Op::Param, Op::Inv, Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Pow});
  }
  if (name == "corpus") {
    return OperatorBasis({Op::Var, Op::Param, Op::Const, Op::Neg, Op::Add, Op::Sub, Op::Mul,
                          Op::Div, Op::Pow, Op::Sqrt, Op::Exp, Op::Log, Op::Sin, Op::Cos,
                          Op::Arcsin, Op::Arccos, Op::Tanh});
  }
  if (name == "all") return all();
  throw ConfigError("unknown basis preset '" + std::string(name) + "'");
}

OperatorBasis OperatorBasis::all() {
  std::vector<Op> ops;
  for (const auto& o : kOps) ops.push_back(o.op);
  return OperatorBasis(std::move(ops));
}

OperatorBasis OperatorBasis::parse(std::string_view text) {
  text = trim(text);
  if (text.empty()) throw ConfigError("empty operator basis");
  // "esr+rational" style preset unions
  if (text.find(',') == std::string_view::npos && !op_from_name(text)) {
    OperatorBasis out;
    std::size_t start = 0;
    while (start <= text.size()) {
      auto plus = text.find('+', start);
      auto part = trim(text.substr(start, plus == std::string_view::npos ? plus : plus - start));
      out = out.merged(preset(part));
      if (plus == std::string_view::npos) break;
      start = plus + 1;
    }
    return out;
  }
  std::vector<Op> ops;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    auto part = trim(text.substr(start, comma == std::string_view::npos ? comma : comma - start));
    if (!part.empty()) {
      auto op = op_from_name(part);
      if (!op) throw ConfigError("unknown operator '" + std::string(part) + "' in basis");
      ops.push_back(*op);
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return OperatorBasis(std::move(ops));
}

std::vector<Op> OperatorBasis::with_arity(int n) const {
  std::vector<Op> out;
  for (Op op : ops_) {
    if (arity(op) == n) out.push_back(op);
  }
  return out;
}

bool OperatorBasis::contains(Op op) const {
  return std::find(ops_.begin(), ops_.end(), op) != ops_.end();
}

void OperatorBasis::require_enumerable() const {
  if (!contains(Op::Var)) throw ConfigError("basis has no variable leaf");
  if (!contains(Op::Param)) throw ConfigError("basis has no parameter leaf");
}

std::vector<std::string> OperatorBasis::tokens() const {
  std::vector<std::string> out;
  for (Op op : ops_) {
    std::string t(token_of(op));
    if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(std::move(t));
  }
  return out;
}

std::string OperatorBasis::to_string() const {
  std::string out;
  for (Op op : ops_) {
    if (!out.empty()) out += ',';
    out += info(op).name;
  }
  return out;
}

OperatorBasis OperatorBasis::merged(const OperatorBasis& other) const {
  std::vector<Op> ops = ops_;
  for (Op op : other.ops_) {
    if (!contains(op)) ops.push_back(op);
  }
  return OperatorBasis(std::move(ops));
}

}  // namespace eqprior
