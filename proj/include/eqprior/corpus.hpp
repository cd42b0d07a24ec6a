#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "eqprior/exprtree.hpp"
#include "eqprior/hash.hpp"
#include "eqprior/ops.hpp"

namespace eqprior {

/// One equation of a training corpus.
struct CorpusEntry {
  std::string id;
  std::string expression;
  std::vector<std::string> variables;
  std::string source;
  std::size_t line = 0;
};

struct LoadOptions {
  /// Reject the whole file when any record fails. When false, bad records are
  /// skipped and listed in LoadReport::errors.
  bool strict = true;
  OperatorBasis basis = OperatorBasis::preset("corpus");
};

struct LoadReport {
  std::size_t records = 0;
  std::map<std::string, std::size_t> per_source;
  std::vector<std::string> errors;
  std::string content_hash;
};

/// Reads "id | expression | var1, var2 [| source]" records; '#' starts a
/// comment. Every expression is parsed against the basis so that errors carry
/// the line number.
std::vector<CorpusEntry> load_corpus(const std::filesystem::path& path, const LoadOptions& opts = {},
                                     LoadReport* report = nullptr);
std::vector<CorpusEntry> load_corpus(std::istream& in, const LoadOptions& opts = {},
                                     LoadReport* report = nullptr);

/// Parses each entry with its declared variables. Integer literals become
/// integer constants, decimal literals and named constants (pi, e) parameters.
std::vector<ExprTree> corpus_to_trees(const std::vector<CorpusEntry>& entries,
                                      const OperatorBasis& basis = OperatorBasis::preset("corpus"));

std::vector<CorpusEntry> filter_by_source(const std::vector<CorpusEntry>& entries,
                                          const std::string& source);

std::string report_json(const LoadReport& report);

}  // namespace eqprior
