#include "eqprior/bench.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <ostream>
#include <tuple>

#include "eqprior/errors.hpp"
#include "eqprior/parse.hpp"

namespace eqprior {

namespace {

BenchmarkSpec make_spec(std::string name, std::string expr, std::vector<double> params, double lo,
                        double hi, int complexity) {
  BenchmarkSpec s;
  s.name = std::move(name);
  s.expression = std::move(expr);
  s.truth = parse_expression(s.expression, OperatorBasis::all());
  s.params = std::move(params);
  s.lo = lo;
  s.hi = hi;
  s.complexity = complexity;
  return s;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

Eigen::VectorXd truth_values(const BenchmarkSpec& spec, const Eigen::MatrixXd& x) {
  return evaluate(spec.truth, spec.params, x, EvalOptions{true});
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string fmt_double(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::vector<BenchmarkSpec> standard_benchmarks() {
  return {
      make_spec("Nguyen-8", "sqrt(x)", {}, 0.0, 4.0, 2),
      make_spec("Korns-1", "a0 + a1*x", {1.57, 2.43}, -50.0, 50.0, 5),
      make_spec("Korns-4", "a0 + a1*sin(x)", {-2.13, 0.13}, -50.0, 50.0, 6),
      make_spec("Korns-6", "a0 + a1*sqrt(x)", {1.3, 0.13}, 0.0, 50.0, 6),
      // 213.81 (1 - exp(-0.547 x)) written with pow so it lies in the basis.
      make_spec("Korns-7", "a0*(a1 - pow(a2, x))", {213.81, 1.0, std::exp(-0.547)}, 0.0, 50.0, 7),
  };
}

BenchmarkSpec benchmark_by_name(const std::string& name) {
  for (auto& s : standard_benchmarks()) {
    if (lower(s.name) == lower(name)) return s;
  }
  throw ConfigError("unknown benchmark '" + name + "'");
}

double noise_sigma(const BenchmarkSpec& spec, std::size_t m, std::uint64_t seed) {
  if (m < 2) throw ConfigError("need at least two draws to measure the spread");
  Rng rng(derive_seed(seed, "sigma/" + spec.name));
  Eigen::MatrixXd x(static_cast<Eigen::Index>(m), 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, 0) = rng.uniform(spec.lo, spec.hi);
  const Eigen::VectorXd y = truth_values(spec, x);
  if (!y.allFinite()) throw DataError(spec.name + ": truth is not finite on its domain");
  const double mean = y.mean();
  const double var = (y.array() - mean).square().sum() / static_cast<double>(m - 1);
  const double sigma = 0.5 * std::sqrt(var);
  if (!(sigma > 0.0)) throw DataError(spec.name + ": truth is constant, noise level undefined");
  return sigma;
}

Dataset make_dataset(const BenchmarkSpec& spec, std::size_t n, double sigma, std::uint64_t seed) {
  if (n == 0) throw ConfigError("dataset size must be positive");
  Rng rng(derive_seed(seed, "data/" + spec.name + "/" + std::to_string(n)));
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, 0) = rng.uniform(spec.lo, spec.hi);
  Eigen::VectorXd y = truth_values(spec, x);
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += sigma * rng.normal();
  return Dataset::iid(std::move(x), std::move(y), sigma);
}

std::string_view to_string(Equivalence e) {
  switch (e) {
    case Equivalence::None: return "none";
    case Equivalence::Generalization: return "generalization";
    case Equivalence::Truth: return "truth";
  }
  return "?";
}

// ---------------------------------------------------------------------------

namespace {

Dataset truth_grid(const BenchmarkSpec& spec) {
  constexpr Eigen::Index kGrid = 512;
  Eigen::MatrixXd x(kGrid, 1);
  // Cell midpoints: uniform draws never land on the end points either.
  for (Eigen::Index i = 0; i < kGrid; ++i) {
    x(i, 0) = spec.lo + (spec.hi - spec.lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(kGrid);
  }
  Eigen::VectorXd y = truth_values(spec, x);
  return Dataset::iid(std::move(x), std::move(y), 1.0);
}

}  // namespace

TruthDetector::TruthDetector(const BenchmarkSpec& spec, const std::vector<ExprTree>& candidates,
                             FitConfig cfg)
    : candidates_(&candidates),
      grid_(truth_grid(spec)),
      scale_(grid_.y().cwiseAbs().maxCoeff()),
      truth_params_(spec.truth.num_params()),
      cfg_(cfg),
      cache_(candidates.size()) {
  cfg_.eval.abs_pow = true;
}

Equivalence TruthDetector::classify(std::size_t index) {
  auto& slot = cache_.at(index);
  if (slot) return *slot;
  const ExprTree& tree = (*candidates_)[index];
  Equivalence result = Equivalence::None;
  const FitResult fit = fit_params(tree, grid_, cfg_);
  if (std::isfinite(fit.logL_hat)) {
    const Eigen::VectorXd pred =
        evaluate(tree, std::span<const double>(fit.theta_hat.data(), tree.num_params()), grid_.x(),
                 cfg_.eval);
    const double dev = (pred - grid_.y()).cwiseAbs().maxCoeff() / scale_;
    if (dev < 1e-4) {
      const bool degenerate = (fit.theta_hat.array().abs() <= 1e-6).any() ||
                              (fit.theta_hat.array().abs() > 1e6).any();
      if (tree.num_params() > truth_params_) {
        result = Equivalence::Generalization;
      } else if (!degenerate) {
        result = Equivalence::Truth;
      }
    }
  }
  slot = result;
  return result;
}

TruthOutcome truth_delta(const MethodRanking& ranking, TruthDetector& detector) {
  TruthOutcome out;
  out.method = ranking.method;
  const auto& r = ranking.ranked;
  if (r.empty()) {
    out.unranked = true;
    return out;
  }
  out.top_index = r.front().index;
  std::optional<std::size_t> truth_at, other_at;
  for (std::size_t i = 0; i < r.size() && !truth_at; ++i) {
    if (detector.classify(r[i].index) == Equivalence::Truth) {
      truth_at = i;
    } else if (!other_at) {
      other_at = i;
    }
  }
  if (truth_at && *truth_at == 0) {
    for (std::size_t i = 1; i < r.size() && !other_at; ++i) {
      if (detector.classify(r[i].index) != Equivalence::Truth) other_at = i;
    }
  }
  if (!truth_at) {
    out.unranked = true;
    return out;
  }
  out.truth_rank = *truth_at + 1;
  out.truth_top2 = *truth_at < 2;
  if (other_at) out.delta = r[*other_at].metric.value - r[*truth_at].metric.value;
  return out;
}

// ---------------------------------------------------------------------------

std::uint64_t run_seed(std::uint64_t base, int index) {
  return derive_seed(base, static_cast<std::uint64_t>(index) + 1);
}

std::vector<BenchRow> run_bench(const BenchConfig& cfg, const std::vector<ExprTree>& candidates,
                                const NGramModel* model, const BenchProgress& progress) {
  std::vector<BenchmarkSpec> specs;
  if (cfg.functions.empty()) {
    specs = standard_benchmarks();
  } else {
    for (const auto& f : cfg.functions) specs.push_back(benchmark_by_name(f));
  }
  if (cfg.seeds < 1) throw ConfigError("need at least one seed");
  for (auto n : cfg.n_grid) {
    if (n == 0) throw ConfigError("dataset size must be positive");
  }

  std::vector<std::string> canon(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) canon[i] = candidates[i].canonical();

  std::vector<BenchRow> rows;
  for (const auto& spec : specs) {
    const double sigma = noise_sigma(spec, 100000, cfg.seed);
    FitConfig detect_cfg = cfg.rank.fit;
    detect_cfg.seed = derive_seed(cfg.seed, "truth/" + spec.name);
    TruthDetector detector(spec, candidates, detect_cfg);

    for (auto n : cfg.n_grid) {
      for (int s = 0; s < cfg.seeds; ++s) {
        const auto t0 = std::chrono::steady_clock::now();
        const std::uint64_t seed = run_seed(cfg.seed, s);
        const Dataset data = make_dataset(spec, n, sigma, seed);
        RankConfig rc = cfg.rank;
        rc.fit.seed = seed;

        std::vector<Candidate> cands(candidates.size());
        parallel_for(candidates.size(), rc.threads, [&](std::size_t i) {
          cands[i].tree = candidates[i];
          cands[i].canonical = canon[i];
          cands[i].fit = fit_params(candidates[i], data, rc.fit);
        });
        const auto rankings = rank(cands, model, data, rc);
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        for (const auto& r : rankings) {
          BenchRow row;
          row.benchmark = spec.name;
          row.n = n;
          row.seed_index = s;
          row.seed = seed;
          row.sigma = sigma;
          row.outcome = truth_delta(r, detector);
          if (!r.ranked.empty()) row.top_expression = canon[row.outcome.top_index];
          row.seconds = secs;
          if (progress) progress(row);
          rows.push_back(std::move(row));
        }
      }
    }
  }
  return rows;
}

void write_rows_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "benchmark,method,n,seed_index,seed,sigma,delta,truth_rank,truth_top2,unranked,top_expression,seconds\n";
  for (const auto& r : rows) {
    out << r.benchmark << ',' << to_string(r.outcome.method) << ',' << r.n << ',' << r.seed_index
        << ',' << r.seed << ',' << fmt_double(r.sigma) << ','
        << (r.outcome.delta ? fmt_double(*r.outcome.delta) : "") << ','
        << (r.outcome.truth_rank ? std::to_string(*r.outcome.truth_rank) : "") << ','
        << (r.outcome.truth_top2 ? 1 : 0) << ',' << (r.outcome.unranked ? 1 : 0) << ','
        << csv_field(r.top_expression) << ',' << fmt_double(r.seconds) << '\n';
  }
}

void write_aggregate_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  struct Agg {
    int runs = 0, first = 0, top2 = 0, unranked = 0;
    std::vector<double> deltas;
  };
  std::map<std::tuple<std::string, std::string, std::size_t>, Agg> groups;
  for (const auto& r : rows) {
    auto& g = groups[{r.benchmark, std::string(to_string(r.outcome.method)), r.n}];
    ++g.runs;
    g.first += r.outcome.truth_rank == std::optional<std::size_t>(1) ? 1 : 0;
    g.top2 += r.outcome.truth_top2 ? 1 : 0;
    g.unranked += r.outcome.unranked ? 1 : 0;
    if (r.outcome.delta) g.deltas.push_back(*r.outcome.delta);
  }
  out << "benchmark,method,n,runs,truth_first,truth_top2,unranked,mean_delta,median_delta\n";
  for (auto& [key, g] : groups) {
    double mean = std::numeric_limits<double>::quiet_NaN(), median = mean;
    if (!g.deltas.empty()) {
      double s = 0;
      for (double d : g.deltas) s += d;
      mean = s / static_cast<double>(g.deltas.size());
      std::sort(g.deltas.begin(), g.deltas.end());
      const auto m = g.deltas.size();
      median = m % 2 ? g.deltas[m / 2] : 0.5 * (g.deltas[m / 2 - 1] + g.deltas[m / 2]);
    }
    out << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ',' << g.runs
        << ',' << g.first << ',' << g.top2 << ',' << g.unranked << ',' << fmt_double(mean) << ','
        << fmt_double(median) << '\n';
  }
}

}  // namespace eqprior
