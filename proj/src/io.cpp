#include "eqprior/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
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

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || p != end) {
    throw DataError("line " + std::to_string(line) + ": '" + s + "' is not a number");
  }
  return v;
}

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  auto in = open(path);
  return read_csv(in);
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    auto cells = split_row(body);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw DataError("line " + std::to_string(lineno) + ": expected " +
                      std::to_string(t.header.size()) + " columns");
    }
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(to_double(c, lineno));
    rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw DataError("CSV has no header");
  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return t;
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  auto in = open(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    std::vector<double> row;
    for (const auto& c : split_row(body)) row.push_back(to_double(c, lineno));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DataError("line " + std::to_string(lineno) + ": ragged matrix");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path.string() + " is empty");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

Dataset load_dataset(const std::filesystem::path& csv, const DataColumns& cols,
                     std::optional<double> sigma,
                     const std::optional<std::filesystem::path>& cov_path) {
  if (sigma.has_value() == cov_path.has_value()) {
    throw ConfigError("give exactly one of a noise sigma or a covariance file");
  }
  const CsvTable t = read_csv(csv);
  auto column = [&](const std::string& name) {
    auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end()) throw DataError("no column '" + name + "' in " + csv.string());
    return static_cast<Eigen::Index>(it - t.header.begin());
  };
  const Eigen::Index yc = column(cols.y);
  std::vector<Eigen::Index> xc;
  if (cols.x.empty()) {
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(t.header.size()); ++j) {
      if (j != yc) xc.push_back(j);
    }
  } else {
    for (const auto& name : cols.x) xc.push_back(column(name));
  }
  Eigen::MatrixXd x(t.values.rows(), static_cast<Eigen::Index>(xc.size()));
  for (std::size_t j = 0; j < xc.size(); ++j) x.col(static_cast<Eigen::Index>(j)) = t.values.col(xc[j]);
  Eigen::VectorXd y = t.values.col(yc);
  if (sigma) return Dataset::iid(std::move(x), std::move(y), *sigma);
  return Dataset::full_cov(std::move(x), std::move(y), read_matrix_csv(*cov_path));
}

std::vector<ExprTree> read_trees_jsonl(const std::filesystem::path& path) {
  auto in = open(path);
  return read_trees_jsonl(in);
}

std::vector<ExprTree> read_trees_jsonl(std::istream& in) {
  std::vector<ExprTree> out;
  std::string line;
  std::size_t lineno = 0;
  const OperatorBasis all = OperatorBasis::all();
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (j.contains("meta")) continue;
    if (!j.contains("expr") || !j["expr"].is_string()) {
      throw DataError("line " + std::to_string(lineno) + ": missing \"expr\"");
    }
    try {
      out.push_back(parse_expression(j["expr"].get<std::string>(), all));
    } catch (const ParseError& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace eqprior
