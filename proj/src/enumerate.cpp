#include "eqprior/enumerate.hpp"

#include <algorithm>
#include <unordered_set>

#include "eqprior/errors.hpp"

namespace eqprior {
namespace {

// Canonical terms reachable from raw trees of one exact size, deduplicated.
class Level {
 public:
  void add(Term t) {
    if (seen_.insert(t->text()).second) terms_.push_back(std::move(t));
  }
  const std::vector<Term>& terms() const { return terms_; }

 private:
  std::unordered_set<std::string> seen_;
  std::vector<Term> terms_;
};

}  // namespace

void enumerate_terms(const OperatorBasis& basis, const EnumerateOptions& opts,
                     const TermVisitor& visit) {
  if (opts.max_complexity < 1) throw ConfigError("max complexity must be >= 1");
  if (opts.num_variables < 1) throw ConfigError("need at least one variable");
  basis.require_enumerable();

  const auto unary = basis.with_arity(1);
  const auto binary = basis.with_arity(2);
  const auto k_max = static_cast<std::size_t>(opts.max_complexity);
  std::vector<Level> levels(k_max + 1);
  std::unordered_set<std::string> reported;

  auto emit = [&](const Term& t, std::size_t k) {
    levels[k].add(t);
    if (reported.insert(t->text()).second) visit(t, static_cast<int>(k));
  };

  for (Op op : basis.ops()) {
    if (op == Op::Var) {
      for (int v = 0; v < opts.num_variables; ++v) emit(make_var(static_cast<std::uint32_t>(v)), 1);
    } else if (op == Op::Param) {
      emit(make_param(), 1);
    }
  }

  for (std::size_t k = 2; k <= k_max; ++k) {
    for (Op op : unary) {
      for (const auto& t : levels[k - 1].terms()) emit(canonical_node(op, t), k);
    }
    for (Op op : binary) {
      for (std::size_t i = 1; i + 1 < k; ++i) {
        const auto& lhs = levels[i].terms();
        const auto& rhs = levels[k - 1 - i].terms();
        for (const auto& l : lhs) {
          for (const auto& r : rhs) emit(canonical_node(op, l, r), k);
        }
      }
    }
  }
}

std::vector<ExprTree> generate(const OperatorBasis& basis, int max_complexity) {
  EnumerateOptions opts;
  opts.max_complexity = max_complexity;
  return generate(basis, opts);
}

std::vector<ExprTree> generate(const OperatorBasis& basis, const EnumerateOptions& opts) {
  std::vector<Term> terms;
  enumerate_terms(basis, opts, [&](const Term& t, int) { terms.push_back(t); });
  std::sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) {
    if (a->size() != b->size()) return a->size() < b->size();
    return a->text() < b->text();
  });
  std::vector<ExprTree> out;
  out.reserve(terms.size());
  for (const auto& t : terms) out.push_back(ExprTree::from_term(t));
  return out;
}

}  // namespace eqprior
