#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "eqprior/errors.hpp"
#include "eqprior/exprtree.hpp"
#include "eqprior/parse.hpp"
#include "support.hpp"

using namespace eqprior;
using testing::tree;

namespace {

// Phrases straight from the recursive term, keeping the full ancestor path
// and cutting it afterwards.
void walk(const Term& t, std::vector<std::string>& path, const Term& left_sibling, int n,
          std::vector<Phrase>& out) {
  Phrase ph;
  const std::size_t keep = static_cast<std::size_t>(n - 1);
  const std::size_t from = path.size() > keep ? path.size() - keep : 0;
  ph.words.assign(path.begin() + static_cast<std::ptrdiff_t>(from), path.end());
  if (left_sibling) {
    ph.kind = PhraseKind::Right;
    ph.words.emplace_back(token_of(left_sibling->op()));
  } else {
    ph.kind = PhraseKind::Left;
  }
  ph.words.emplace_back(token_of(t->op()));
  out.push_back(ph);
  path.emplace_back(token_of(t->op()));
  if (t->arity() >= 1) walk(t->child(0), path, nullptr, n, out);
  if (t->arity() == 2) walk(t->child(1), path, t->child(0), n, out);
  path.pop_back();
}

std::vector<Phrase> oracle_phrases(const ExprTree& tr, int n) {
  std::vector<Phrase> out;
  std::vector<std::string> path;
  walk(tr.to_term(), path, nullptr, n, out);
  return out;
}

Phrase left(std::vector<std::string> w) { return {PhraseKind::Left, std::move(w)}; }
Phrase right(std::vector<std::string> w) { return {PhraseKind::Right, std::move(w)}; }

}  // namespace

TEST_SUITE("exprtree") {

TEST_CASE("parse sizes") {
  CHECK(tree("sqrt(x)").complexity() == 2);
  const auto x = tree("x");
  CHECK(x.complexity() == 1);
  CHECK(x.num_params() == 0);
  const auto k1 = tree("1.57 + 2.43*x");
  CHECK(k1.complexity() == 5);
  CHECK(k1.num_params() == 2);
  CHECK(k1.param_hints()[0] == doctest::Approx(1.57));
  CHECK(k1.canonical() == "+(*(a,x),a)");
}

TEST_CASE("parse negatives and constants") {
  const auto t = tree("-3*x");
  CHECK(t.complexity() == 4);  // *(neg(3),x)
  CHECK(t.int_constants() == std::vector<std::uint32_t>{3});
  CHECK(tree("x - -x").complexity() == 4);
  CHECK(tree("x**2").to_string() == tree("x^2").to_string());
}

TEST_CASE("parse errors") {
  const auto esr = OperatorBasis::preset("esr");
  CHECK_THROWS_AS(parse_expression("", esr), ParseError);
  CHECK_THROWS_AS(parse_expression("erf(x)", esr), ParseError);
  CHECK_THROWS_AS(parse_expression("exp(x)", esr), DataError);
  CHECK_THROWS_AS(parse_expression("sin(x,x)", esr), DataError);
  CHECK_THROWS_AS(parse_expression("(x+1", esr), ParseError);
  CHECK_THROWS_AS(parse_expression("0*x", esr), DataError);
}

TEST_CASE("parse round trip is a fixed point") {
  Rng rng(11);
  const auto basis = OperatorBasis::preset("all");
  for (int i = 0; i < 300; ++i) {
    const auto t = ExprTree::from_term(testing::random_term(rng, basis, 12));
    const auto once = tree(t.to_string());
    CHECK(once.to_string() == t.to_string());
    CHECK(tree(once.to_string()).to_string() == once.to_string());
  }
}

TEST_CASE("phrases of sin(x+a)") {
  const auto ph = extract_phrases(tree("sin(x+a)"), 2);
  const std::vector<Phrase> expect{left({"sin"}), left({"sin", "+"}), left({"+", "x"}),
                                   right({"+", "x", "a"})};
  CHECK(ph == expect);
}

TEST_CASE("phrases of a single node") {
  for (int n = 1; n <= 4; ++n) CHECK(extract_phrases(tree("x"), n) == std::vector{left({"x"})});
}

TEST_CASE("phrases of (x+a)*x with n=1") {
  const auto ph = extract_phrases(tree("(x+a)*x"), 1);
  const std::vector<Phrase> expect{left({"*"}), left({"+"}), left({"x"}), right({"x", "a"}),
                                   right({"+", "x"})};
  CHECK(ph == expect);
}

TEST_CASE("phrases match the recursive oracle and cover every node once") {
  Rng rng(5);
  const auto basis = OperatorBasis::preset("all");
  for (int i = 0; i < 400; ++i) {
    const auto t = ExprTree::from_term(testing::random_term(rng, basis, 15));
    for (int n = 1; n <= 4; ++n) {
      const auto ph = extract_phrases(t, n);
      CHECK(ph.size() == t.complexity());
      CHECK(ph == oracle_phrases(t, n));
    }
  }
  CHECK_THROWS(extract_phrases(tree("x"), 0));
}

TEST_CASE("evaluate") {
  const auto cubic = tree("a0*x^3 + a1");
  Eigen::MatrixXd x(1, 1);
  x << 2.0;
  const std::vector<double> theta{1.0, 0.0};
  CHECK(evaluate(cubic, theta, x)(0) == 8.0);
  x << 4.0;
  CHECK(evaluate(tree("sqrt(x)"), {}, x)(0) == 2.0);
  x << -1.0;
  CHECK_FALSE(std::isfinite(evaluate(tree("log(x)"), {}, x)(0)));
  CHECK_THROWS_AS(evaluate(cubic, std::vector<double>{1.0}, x), std::invalid_argument);
  CHECK_THROWS_AS(evaluate(tree("x0*x1"), {}, x), std::invalid_argument);
}

TEST_CASE("evaluate with abs pow") {
  Eigen::MatrixXd x(1, 1);
  x << -8.0;
  const auto t = tree("pow(x, a)");
  const std::vector<double> third{1.0 / 3.0};
  CHECK_FALSE(std::isfinite(evaluate(t, third, x)(0)));
  CHECK(evaluate(t, third, x, {.abs_pow = true})(0) == doctest::Approx(2.0));
}

TEST_CASE("canonical forms") {
  CHECK(tree("a+x").canonical() == tree("x+a").canonical());
  CHECK(tree("a*a*x").canonical() == tree("a*x").canonical());
  CHECK(tree("sin(sin(x+x))").canonical() != tree("sin(x)+sin(x)").canonical());
  CHECK(tree("-(-x)").canonical() == "x");
  CHECK(tree("x - a").canonical() == tree("a + x").canonical());
  CHECK(tree("x / a").canonical() == tree("a * x").canonical());
  CHECK(tree("a - x").canonical() != tree("a + x").canonical());
  CHECK(tree("sin(a*a) + x").canonical() == tree("x + a").canonical());
  CHECK(tree("x*(a*x)").canonical() == tree("a*(x*x)").canonical());
}

TEST_CASE("canonical form is idempotent and never larger") {
  Rng rng(17);
  const auto basis = OperatorBasis::preset("all");
  for (int i = 0; i < 500; ++i) {
    const auto t = ExprTree::from_term(testing::random_term(rng, basis, 14));
    const auto c = canonical_tree(t);
    CHECK(c.canonical() == t.canonical());
    CHECK(tree(t.canonical()).canonical() == t.canonical());
    CHECK(tree(t.canonical()).complexity() <= t.complexity());
  }
}

TEST_CASE("absorbed parameters keep the best fit") {
  // a*a*x and a*x reach the same maximum likelihood.
  Eigen::MatrixXd x(20, 1);
  Eigen::VectorXd y(20);
  for (int i = 0; i < 20; ++i) {
    x(i, 0) = 0.5 + i;
    y(i) = 1.7 * x(i, 0) + 0.1 * std::sin(3.0 * i);
  }
  const auto data = Dataset::iid(x, y, 0.1);
  const auto f1 = fit_params(tree("a*a*x"), data, {});
  const auto f2 = fit_params(tree("a*x"), data, {});
  CHECK(f1.logL_hat == doctest::Approx(f2.logL_hat).epsilon(1e-9));
}

TEST_CASE("counts used by description lengths") {
  const auto t = tree("a*x + sin(x)");
  CHECK(t.complexity() == 6);
  CHECK(t.num_operators() == 5);
  CHECK(t.num_params() == 1);
  CHECK(tree("a0 + a1*x").param_slots().size() == 2);
  CHECK_THROWS_AS(tree("a0 + a2*x"), DataError);
  CHECK_THROWS_AS(tree("a0 + a*x"), DataError);
}

}  // TEST_SUITE
