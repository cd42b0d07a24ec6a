#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "eqprior/exprtree.hpp"
#include "eqprior/fit.hpp"
#include "eqprior/metrics.hpp"

namespace eqprior {

class NGramModel;

struct BenchmarkSpec {
  std::string name;
  std::string expression;  // generating form with named parameters
  ExprTree truth;
  std::vector<double> params;
  double lo = 0.0;
  double hi = 1.0;
  int complexity = 0;
};

/// Nguyen-8, Korns-1, Korns-4, Korns-6, Korns-7.
std::vector<BenchmarkSpec> standard_benchmarks();
/// Throws ConfigError for an unknown name (case-insensitive).
BenchmarkSpec benchmark_by_name(const std::string& name);

/// Half the standard deviation of the truth over m uniform draws from the
/// domain. Throws DataError for a constant or non-finite truth.
double noise_sigma(const BenchmarkSpec& spec, std::size_t m = 100000, std::uint64_t seed = 0);

/// n uniform draws with Gaussian noise of the given sigma. Throws ConfigError for n = 0.
Dataset make_dataset(const BenchmarkSpec& spec, std::size_t n, double sigma, std::uint64_t seed);

enum class Equivalence { None, Generalization, Truth };
std::string_view to_string(Equivalence e);

/// Decides whether candidates reproduce the generating function: a fit to the
/// noiseless truth on a 512-point grid must match it to 1e-4 relative, with no
/// parameter driven to zero or infinity. Matching candidates with more free
/// parameters than the truth are generalizations. Results are cached per
/// candidate index.
class TruthDetector {
 public:
  TruthDetector(const BenchmarkSpec& spec, const std::vector<ExprTree>& candidates,
                FitConfig cfg = {});
  Equivalence classify(std::size_t index);

 private:
  const std::vector<ExprTree>* candidates_;
  Dataset grid_;
  double scale_;
  std::size_t truth_params_;
  FitConfig cfg_;
  std::vector<std::optional<Equivalence>> cache_;
};

struct TruthOutcome {
  Method method = Method::Likelihood;
  /// Best non-truth minus best truth; positive when the truth ranks first.
  std::optional<double> delta;
  std::optional<std::size_t> truth_rank;  // 1-based
  bool truth_top2 = false;
  std::size_t top_index = 0;
  bool unranked = false;  // truth absent from the ranking
};

TruthOutcome truth_delta(const MethodRanking& ranking, TruthDetector& detector);

struct BenchConfig {
  std::vector<std::string> functions;  // empty = all standard benchmarks
  std::vector<std::size_t> n_grid{32, 100, 316, 1000, 3162, 10000};
  int seeds = 5;
  std::uint64_t seed = 0;
  int max_complexity = 6;
  RankConfig rank;
};

struct BenchRow {
  std::string benchmark;
  std::size_t n = 0;
  int seed_index = 0;
  std::uint64_t seed = 0;
  double sigma = 0.0;
  TruthOutcome outcome;
  std::string top_expression;
  double seconds = 0.0;
};

using BenchProgress = std::function<void(const BenchRow&)>;

/// Runs every (function, N, seed) combination over the candidates and returns
/// one row per method.
std::vector<BenchRow> run_bench(const BenchConfig& cfg, const std::vector<ExprTree>& candidates,
                                const NGramModel* model, const BenchProgress& progress = {});

/// Seed of run `index` derived from the base seed.
std::uint64_t run_seed(std::uint64_t base, int index);

void write_rows_csv(std::ostream& out, const std::vector<BenchRow>& rows);
/// Per (function, method, N): runs, truth-first and truth-top-2 counts,
/// unranked count, mean and median delta.
void write_aggregate_csv(std::ostream& out, const std::vector<BenchRow>& rows);

}  // namespace eqprior
