#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "eqprior/corpus.hpp"
#include "eqprior/errors.hpp"
#include "support.hpp"

using namespace eqprior;

namespace {

std::vector<CorpusEntry> load_text(const std::string& text, LoadOptions opts = {},
                                   LoadReport* report = nullptr) {
  std::istringstream in(text);
  return load_corpus(in, opts, report);
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("one record") {
  const auto e = load_text("I.6.20a | exp(-x**2/2)/sqrt(2*pi) | x\n");
  REQUIRE(e.size() == 1);
  CHECK(e[0].id == "I.6.20a");
  CHECK(e[0].variables == std::vector<std::string>{"x"});
  CHECK(e[0].line == 1);
}

TEST_CASE("empty input") {
  CHECK(load_text("").empty());
  CHECK(load_text("# only a comment\n\n").empty());
}

TEST_CASE("unknown operator names the operator and the line") {
  try {
    load_text("a | x | x\nb | erf(x) | x\n");
    FAIL("expected a DataError");
  } catch (const DataError& err) {
    const std::string what = err.what();
    CHECK(what.find("erf") != std::string::npos);
    CHECK(what.find("line 2") != std::string::npos);
  }
}

TEST_CASE("duplicate ids") {
  CHECK_THROWS_AS(load_text("a | x | x\na | x*x | x\n"), DataError);
}

TEST_CASE("lenient mode skips and reports") {
  LoadReport rep;
  const auto e = load_text("a | x | x\nb | erf(x) | x\nc | sin(y) | y | src\n", {.strict = false}, &rep);
  CHECK(e.size() == 2);
  CHECK(rep.errors.size() == 1);
  CHECK(rep.per_source.at("src") == 1);
}

TEST_CASE("a*x is a 3-node tree") {
  const auto t = corpus_to_trees(load_text("k | a*x | a, x\n"));
  REQUIRE(t.size() == 1);
  CHECK(t[0].complexity() == 3);
}

TEST_CASE("shipped corpus") {
  LoadReport rep;
  const auto entries = load_corpus(testing::corpus_path(), {}, &rep);
  CHECK(entries.size() == 161);
  CHECK(corpus_to_trees(entries).size() == 161);
  CHECK(rep.per_source.at("feynman") == 100);
  CHECK(rep.per_source.at("feynman-bonus") == 20);
  CHECK(corpus_to_trees(filter_by_source(entries, "feynman")).size() == 100);
  CHECK(rep.content_hash.size() == 16);
}

TEST_CASE("loading is idempotent and independent of record order") {
  std::ifstream in(testing::corpus_path());
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) {
    if (!l.empty() && l[0] != '#') lines.push_back(l);
  }
  auto texts = [](const std::vector<CorpusEntry>& es) {
    std::vector<std::string> out;
    for (const auto& t : corpus_to_trees(es)) out.push_back(t.to_string());
    std::sort(out.begin(), out.end());
    return out;
  };
  std::string forward, backward;
  for (const auto& l : lines) forward += l + "\n";
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) backward += *it + "\n";
  const auto a = texts(load_text(forward));
  CHECK(a == texts(load_text(forward)));
  CHECK(a == texts(load_text(backward)));
}

}  // TEST_SUITE
