#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "eqprior/errors.hpp"
#include "eqprior/ngram.hpp"
#include "support.hpp"

using namespace eqprior;
using testing::tree;

namespace {

using Words = std::vector<std::string>;

double total(const NGramModel& m, PhraseKind kind, const Words& ctx) {
  double s = 0.0;
  for (const auto& w : m.vocabulary()) s += m.probability(kind, ctx, w);
  return s;
}

std::vector<ExprTree> random_corpus(Rng& rng, int n, int budget) {
  const auto basis = OperatorBasis::parse("x,a,const,+,-,*,/,pow,sin,sqrt,exp");
  std::vector<ExprTree> out;
  for (int i = 0; i < n; ++i) out.push_back(ExprTree::from_term(testing::random_term(rng, basis, budget)));
  return out;
}

Words random_context(Rng& rng, const NGramModel& m, PhraseKind kind) {
  const auto& v = m.vocabulary();
  const auto len = static_cast<std::size_t>(rng.uniform() * static_cast<double>(m.max_context(kind) + 1));
  Words ctx;
  for (std::size_t i = 0; i < len; ++i) {
    ctx.push_back(v[static_cast<std::size_t>(rng.uniform() * static_cast<double>(v.size()))]);
  }
  return ctx;
}

}  // namespace

TEST_SUITE("ngram") {

TEST_CASE("Good-Turing counts") {
  const auto t13 = CountsOfCounts::from({{1, 3}, {2, 1}});
  CHECK(good_turing_count(1, t13) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  const auto t23 = CountsOfCounts::from({{2, 1}, {3, 1}});
  CHECK(good_turing_count(2, t23) == doctest::Approx(3.0));

  // N_3 = 0: the log-linear fit through Z_1 = 3, Z_2 = 1 takes over.
  const double slope = -std::log(3.0) / std::log(2.0);
  const double expect = 3.0 * std::pow(1.5, slope);
  CHECK(t13.sgt.valid);
  CHECK(good_turing_count(2, t13) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(expect / 2.0 > 0.0);
  CHECK(expect / 2.0 <= 1.0);

  // One distinct count: no fit, the raw count stays.
  CHECK(good_turing_count(1, CountsOfCounts::from({{1, 4}})) == 1.0);
}

TEST_CASE("counts of x+x with n=2") {
  const std::vector<ExprTree> corpus{tree("x+x")};
  const auto m = NGramModel::train(corpus, 2);
  CHECK(m.count(PhraseKind::Left, Words{}, "+") == 1);
  CHECK(m.count(PhraseKind::Left, Words{"+"}, "x") == 1);
  CHECK(m.count(PhraseKind::Right, Words{"+", "x"}, "x") == 1);
  CHECK(m.context_count(PhraseKind::Left, Words{}) == 2);
  CHECK(m.probability(PhraseKind::Left, Words{"+"}, "x") == 1.0);
  CHECK(m.probability(PhraseKind::Right, Words{"+", "x"}, "x") == 1.0);
}

TEST_CASE("unigram left counts equal non-right nodes") {
  const auto trees = testing::corpus_trees();
  const auto m = NGramModel::train(trees, 2);
  std::uint64_t expect = 0;
  for (const auto& t : trees) {
    for (NodeId id = 0; id < t.complexity(); ++id) expect += t.is_right_child(id) ? 0 : 1;
  }
  CHECK(m.context_count(PhraseKind::Left, Words{}) == expect);
}

TEST_CASE("duplicated corpus doubles counts") {
  const auto trees = testing::corpus_trees();
  auto twice = trees;
  twice.insert(twice.end(), trees.begin(), trees.end());
  const auto a = NGramModel::train(trees, 2);
  const auto b = NGramModel::train(twice, 2);
  for (auto kind : {PhraseKind::Left, PhraseKind::Right}) {
    for (const auto& ctx : a.observed_contexts(kind)) {
      CHECK(b.context_count(kind, ctx) == 2 * a.context_count(kind, ctx));
    }
  }
  // With a single count value the discounts stay at 1 and ratios are unchanged.
  const std::vector<ExprTree> one{tree("x+x")};
  const std::vector<ExprTree> two{tree("x+x"), tree("x+x")};
  const auto p1 = NGramModel::train(one, 2);
  const auto p2 = NGramModel::train(two, 2);
  for (const auto& w : p1.vocabulary()) {
    CHECK(p1.probability(PhraseKind::Left, Words{}, w) == p2.probability(PhraseKind::Left, Words{}, w));
  }
}

TEST_CASE("seen phrases use the discounted ratio") {
  for (int k : {0, 1}) {
    const auto m = NGramModel::train(testing::fsred_trees(), 2, k);
    int checked = 0;
    for (auto kind : {PhraseKind::Left, PhraseKind::Right}) {
      for (const auto& ctx : m.observed_contexts(kind)) {
        // The empty context may rescale seen words to make room for unseen ones.
        if (ctx.empty() || m.leftover_mass(kind, ctx) <= 0.0) continue;
        for (const auto& w : m.vocabulary()) {
          const auto c = m.count(kind, ctx, w);
          if (c <= static_cast<std::uint64_t>(k)) continue;
          const double direct = m.discount(kind, ctx.size(), c) * static_cast<double>(c) /
                                static_cast<double>(m.context_count(kind, ctx));
          CHECK(m.probability(kind, ctx, w) == doctest::Approx(direct).epsilon(1e-12));
          ++checked;
        }
      }
    }
    CHECK(checked > 100);
  }
}

TEST_CASE("normalization over random corpora") {
  Rng rng(2024);
  for (int trial = 0; trial < 12; ++trial) {
    const auto corpus = random_corpus(rng, 3 + trial * 4, 4 + trial % 9);
    const int order = 1 + trial % 3;
    const int k = trial % 4 == 3 ? 1 : 0;
    const Words extra{"cos", "log", "inv"};
    const auto m = NGramModel::train(corpus, order, k, extra);
    for (auto kind : {PhraseKind::Left, PhraseKind::Right}) {
      for (const auto& ctx : m.observed_contexts(kind)) {
        CHECK(total(m, kind, ctx) == doctest::Approx(1.0).epsilon(1e-9));
        const double beta = m.leftover_mass(kind, ctx);
        CHECK(beta >= 0.0);
        CHECK(beta <= 1.0);
      }
      for (int i = 0; i < 50; ++i) {
        CHECK(total(m, kind, random_context(rng, m, kind)) == doctest::Approx(1.0).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("n=1 log prior is a per-node product") {
  const auto m = NGramModel::train(testing::corpus_trees(), 1);
  for (const char* text : {"sin(x)+sin(x)", "sqrt(a*x+a)", "x", "pow(x,a)/exp(x)"}) {
    const auto t = tree(text);
    double expect = 0.0;
    for (NodeId id = 0; id < t.complexity(); ++id) {
      const std::string w(t.token(id));
      if (t.is_right_child(id)) {
        const Words sib{std::string(t.token(t.left_sibling(id)))};
        expect += std::log(m.probability(PhraseKind::Right, sib, w));
      } else {
        expect += std::log(m.probability(PhraseKind::Left, Words{}, w));
      }
    }
    CHECK(log_prior(m, t) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(log_prior(m, t) <= 0.0);
  }
}

TEST_CASE("single node prior") {
  const auto m = NGramModel::train(testing::corpus_trees(), 3);
  CHECK(log_prior(m, tree("x")) == std::log(m.probability(PhraseKind::Left, Words{}, "x")));
}

TEST_CASE("dropping the top order gives the lower-order model") {
  const auto trees = testing::corpus_trees();
  const auto full = NGramModel::train(trees, 3);
  const auto m3 = full.without_top_order();
  const auto m2 = NGramModel::train(trees, 2);
  Rng rng(3);
  for (auto kind : {PhraseKind::Left, PhraseKind::Right}) {
    for (int i = 0; i < 200; ++i) {
      const auto ctx = random_context(rng, full, kind);
      for (const auto& w : m2.vocabulary()) CHECK(m3.probability(kind, ctx, w) == m2.probability(kind, ctx, w));
    }
  }
}

TEST_CASE("serialization round trip and determinism") {
  auto trees = testing::corpus_trees();
  const auto m = NGramModel::train(trees, 3, 0, Words{"inv"});
  const auto json = m.to_json();
  const auto back = NGramModel::from_json(json);
  CHECK(back.to_json() == json);
  CHECK(log_prior(back, tree("sin(x)+sin(x)")) == log_prior(m, tree("sin(x)+sin(x)")));
  std::reverse(trees.begin(), trees.end());
  CHECK(NGramModel::train(trees, 3, 0, Words{"inv"}).to_json() == json);
  CHECK_THROWS_AS(NGramModel::from_json("{\"format\":\"other\"}"), DataError);
}

TEST_CASE("errors") {
  const auto m = NGramModel::train(std::vector<ExprTree>{tree("x+x")}, 2);
  try {
    m.probability(PhraseKind::Left, Words{}, "sin");
    FAIL("expected OutOfVocabulary");
  } catch (const OutOfVocabulary& e) {
    CHECK(e.token() == "sin");
  }
  CHECK_THROWS_AS(log_prior(m, tree("sin(x)")), OutOfVocabulary);
  CHECK_THROWS_AS(NGramModel::train(std::vector<ExprTree>{}, 2), DataError);
  CHECK_THROWS_AS(NGramModel::train(std::vector<ExprTree>{tree("x")}, 0), ConfigError);
}

}  // TEST_SUITE
