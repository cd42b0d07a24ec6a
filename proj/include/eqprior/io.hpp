#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "eqprior/exprtree.hpp"
#include "eqprior/fit.hpp"

namespace eqprior {

struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd values;  // rows x header.size()
};

/// Numeric CSV with a header row. Lines starting with '#' are skipped.
/// Throws DataError.
CsvTable read_csv(const std::filesystem::path& path);
CsvTable read_csv(std::istream& in);

/// Headerless numeric matrix, e.g. a covariance.
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

struct DataColumns {
  std::string y = "y";
  /// Variable columns in order; empty means every column except y.
  std::vector<std::string> x;
};

/// Builds a dataset from a CSV. Exactly one of sigma and cov_path must be
/// given (ConfigError otherwise).
Dataset load_dataset(const std::filesystem::path& csv, const DataColumns& cols,
                     std::optional<double> sigma,
                     const std::optional<std::filesystem::path>& cov_path = std::nullopt);

/// One JSON object per line with an "expr" field; lines carrying "meta" are
/// skipped. Expressions are parsed against every known operator.
std::vector<ExprTree> read_trees_jsonl(const std::filesystem::path& path);
std::vector<ExprTree> read_trees_jsonl(std::istream& in);

}  // namespace eqprior
