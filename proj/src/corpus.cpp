#include "eqprior/corpus.hpp"

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "eqprior/errors.hpp"
#include "eqprior/parse.hpp"

namespace eqprior {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto at = s.find(sep, start);
    out.push_back(trim(s.substr(start, at == std::string_view::npos ? at : at - start)));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return out;
}

ParseOptions parse_options_for(const CorpusEntry& e) {
  ParseOptions po;
  po.variables = e.variables;
  return po;
}

}  // namespace

std::vector<CorpusEntry> load_corpus(const std::filesystem::path& path, const LoadOptions& opts,
                                     LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file " + path.string());
  return load_corpus(in, opts, report);
}

std::vector<CorpusEntry> load_corpus(std::istream& in, const LoadOptions& opts,
                                     LoadReport* report) {
  std::vector<CorpusEntry> out;
  LoadReport rep;
  std::set<std::string> ids;
  std::string line;
  std::string all;
  std::size_t lineno = 0;

  auto fail = [&](std::size_t at, const std::string& why) {
    const std::string msg = "line " + std::to_string(at) + ": " + why;
    if (opts.strict) throw DataError(msg);
    rep.errors.push_back(msg);
  };

  while (std::getline(in, line)) {
    ++lineno;
    all += line;
    all += '\n';
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;

    const auto fields = split(body, '|');
    if (fields.size() < 2 || fields.size() > 4) {
      fail(lineno, "expected 'id | expression | variables [| source]'");
      continue;
    }
    CorpusEntry e;
    e.id = fields[0];
    e.expression = fields[1];
    e.line = lineno;
    if (fields.size() >= 3 && !fields[2].empty()) {
      for (auto& v : split(fields[2], ',')) {
        if (!v.empty()) e.variables.push_back(std::move(v));
      }
    }
    if (fields.size() == 4) e.source = fields[3];
    if (e.id.empty()) {
      fail(lineno, "missing id");
      continue;
    }
    if (!ids.insert(e.id).second) {
      fail(lineno, "duplicate id '" + e.id + "'");
      continue;
    }
    try {
      (void)parse_expression(e.expression, opts.basis, parse_options_for(e));
    } catch (const DataError& err) {
      fail(lineno, "cannot parse '" + e.expression + "': " + err.what());
      continue;
    }
    ++rep.per_source[e.source];
    out.push_back(std::move(e));
  }
  rep.records = out.size();
  rep.content_hash = fnv1a_hex(all);
  if (report) *report = std::move(rep);
  return out;
}

std::vector<ExprTree> corpus_to_trees(const std::vector<CorpusEntry>& entries,
                                      const OperatorBasis& basis) {
  std::vector<ExprTree> trees;
  trees.reserve(entries.size());
  for (const auto& e : entries) {
    try {
      trees.push_back(parse_expression(e.expression, basis, parse_options_for(e)));
    } catch (const DataError& err) {
      throw DataError("corpus entry '" + e.id + "': " + err.what());
    }
  }
  return trees;
}

std::vector<CorpusEntry> filter_by_source(const std::vector<CorpusEntry>& entries,
                                          const std::string& source) {
  std::vector<CorpusEntry> out;
  for (const auto& e : entries) {
    if (e.source == source) out.push_back(e);
  }
  return out;
}

std::string report_json(const LoadReport& report) {
  nlohmann::json j;
  j["records"] = report.records;
  j["per_source"] = report.per_source;
  j["errors"] = report.errors;
  j["content_hash"] = report.content_hash;
  return j.dump();
}

}  // namespace eqprior
