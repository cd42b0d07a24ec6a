#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "eqprior/corpus.hpp"
#include "eqprior/exprtree.hpp"
#include "eqprior/fit.hpp"
#include "eqprior/ops.hpp"
#include "eqprior/parse.hpp"

namespace testing {

inline std::filesystem::path corpus_path() {
  return std::filesystem::path(EQPRIOR_DATA_DIR) / "scientific_equations.txt";
}

inline eqprior::ExprTree tree(const std::string& text) {
  return eqprior::parse_expression(text, eqprior::OperatorBasis::all());
}

inline std::vector<eqprior::ExprTree> corpus_trees(const std::string& source = "") {
  auto entries = eqprior::load_corpus(corpus_path());
  if (!source.empty()) entries = eqprior::filter_by_source(entries, source);
  return eqprior::corpus_to_trees(entries);
}

/// FSReD: the 100 Feynman equations plus the 20 bonus ones.
inline std::vector<eqprior::ExprTree> fsred_trees() {
  auto trees = corpus_trees("feynman");
  for (auto& t : corpus_trees("feynman-bonus")) trees.push_back(std::move(t));
  return trees;
}

/// Random term over the basis with at most `budget` nodes.
inline eqprior::Term random_term(eqprior::Rng& rng, const eqprior::OperatorBasis& basis, int budget) {
  using namespace eqprior;
  const auto leaves = basis.with_arity(0);
  const auto unary = basis.with_arity(1);
  const auto binary = basis.with_arity(2);
  auto pick = [&](const std::vector<Op>& ops) {
    return ops[static_cast<std::size_t>(rng.uniform() * static_cast<double>(ops.size()))];
  };
  const double u = rng.uniform();
  if (budget >= 3 && !binary.empty() && u < 0.45) {
    const int left = 1 + static_cast<int>(rng.uniform() * (budget - 2));
    auto l = random_term(rng, basis, left);
    auto r = random_term(rng, basis, budget - 1 - l->size());
    return make_binary(pick(binary), l, r);
  }
  if (budget >= 2 && !unary.empty() && u < 0.75) {
    return make_unary(pick(unary), random_term(rng, basis, budget - 1));
  }
  const Op leaf = pick(leaves);
  if (leaf == Op::Var) return make_var();
  if (leaf == Op::Param) return make_param();
  return make_const(1 + static_cast<std::uint32_t>(rng.uniform() * 3));
}

}  // namespace testing
