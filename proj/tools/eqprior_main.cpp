// eqprior command line: train/evaluate the function prior, enumerate
// candidates, fit, rank and benchmark.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "eqprior/bench.hpp"
#include "eqprior/corpus.hpp"
#include "eqprior/enumerate.hpp"
#include "eqprior/errors.hpp"
#include "eqprior/fit.hpp"
#include "eqprior/io.hpp"
#include "eqprior/metrics.hpp"
#include "eqprior/ngram.hpp"
#include "eqprior/parse.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace eqprior;

namespace {

const char* kVersion = EQPRIOR_VERSION;

std::string default_corpus() { return std::string(EQPRIOR_DATA_DIR) + "/scientific_equations.txt"; }

struct Global {
  int threads = 0;
  std::uint64_t seed = 0;
  std::string log_level = "info";
};

struct FitFlags {
  int restarts = 20;
  int max_iters = 200;
  double tol = 1e-10;
  bool abs_pow = true;

  void add(CLI::App* cmd) {
    cmd->add_option("--restarts", restarts, "Optimizer starts per function")->check(CLI::PositiveNumber);
    cmd->add_option("--max-iters", max_iters, "Iterations per start")->check(CLI::PositiveNumber);
    cmd->add_option("--tol", tol, "Relative convergence tolerance")->check(CLI::PositiveNumber);
    cmd->add_option("--abs-pow", abs_pow, "Evaluate pow(u, v) as |u|^v");
  }
  FitConfig config(std::uint64_t seed) const {
    FitConfig c;
    c.restarts = restarts;
    c.max_iters = max_iters;
    c.tol = tol;
    c.seed = seed;
    c.eval.abs_pow = abs_pow;
    return c;
  }
};

struct MetricFlags {
  std::optional<double> b;
  std::string b_rule = "inv-sqrt-n";
  std::string lattice = "rectangular";
  bool fbf_nu = true;
  bool zero_tiny = true;

  void add(CLI::App* cmd) {
    cmd->add_option("--b", b, "Fixed FBF training fraction (overrides --b-rule)");
    cmd->add_option("--b-rule", b_rule, "FBF fraction rule")
        ->check(CLI::IsMember({"inv-sqrt-n", "log-n-over-n"}));
    cmd->add_option("--lattice", lattice, "Parameter lattice")
        ->check(CLI::IsMember({"rectangular", "optimal"}));
    cmd->add_option("--fbf-nu", fbf_nu, "Keep the lattice term in the FBF codelength");
    cmd->add_option("--zero-tiny", zero_tiny, "Zero parameters with negative codelength (MDL)");
  }
  MetricOptions options() const {
    MetricOptions o;
    o.fbf.b = b;
    o.fbf.rule = b_rule == "log-n-over-n" ? FbfConfig::Rule::LogNOverN : FbfConfig::Rule::InvSqrtN;
    o.lattice = lattice == "optimal" ? Lattice::Optimal : Lattice::Rectangular;
    o.fbf_keep_nu = fbf_nu;
    o.zero_tiny_params = zero_tiny;
    if (b && !(*b > 0.0 && *b <= 1.0)) throw ConfigError("--b must lie in (0, 1]");
    return o;
  }
};

struct DataFlags {
  std::string path;
  std::string y = "y";
  std::vector<std::string> x;
  std::optional<double> sigma;
  std::optional<std::string> cov;

  void add(CLI::App* cmd) {
    cmd->add_option("--data", path, "CSV with a header row")->required()->check(CLI::ExistingFile);
    cmd->add_option("--y", y, "Response column");
    cmd->add_option("--x", x, "Variable columns, in order (default: all but y)")->delimiter(',');
    cmd->add_option("--sigma", sigma, "Gaussian noise standard deviation");
    cmd->add_option("--cov", cov, "Noise covariance, headerless N x N CSV")->check(CLI::ExistingFile);
  }
  Dataset load() const {
    std::optional<fs::path> cov_path;
    if (cov) cov_path = *cov;
    return load_dataset(path, DataColumns{y, x}, sigma, cov_path);
  }
};

json meta(const std::string& command, const std::string& config_hash, const std::string& corpus_hash,
          std::uint64_t seed) {
  return json{{"tool", "eqprior"},      {"version", kVersion},          {"command", command},
              {"config_hash", config_hash}, {"corpus_hash", corpus_hash}, {"seed", seed}};
}

void write_meta_comments(std::ostream& out, const json& m) {
  for (const auto& [k, v] : m.items()) {
    out << "# " << k << ": " << (v.is_string() ? v.get<std::string>() : v.dump()) << '\n';
  }
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

std::string fmt_num(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
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

NGramModel train_from_corpus(const std::string& path, int order, int k,
                             const std::vector<std::string>& sources, const std::string& vocab_basis,
                             bool strict, std::string* corpus_hash) {
  LoadOptions lo;
  lo.strict = strict;
  LoadReport report;
  auto entries = load_corpus(path, lo, &report);
  for (const auto& e : report.errors) spdlog::warn("skipped {}", e);
  if (!sources.empty()) {
    std::vector<CorpusEntry> kept;
    for (const auto& s : sources) {
      auto part = filter_by_source(entries, s);
      kept.insert(kept.end(), part.begin(), part.end());
    }
    entries = std::move(kept);
  }
  const auto trees = corpus_to_trees(entries);
  std::vector<std::string> vocab;
  if (!vocab_basis.empty()) vocab = OperatorBasis::parse(vocab_basis).tokens();
  auto model = NGramModel::train(trees, order, k, vocab);
  spdlog::info("trained order-{} model on {} equations, vocabulary {}", order, trees.size(),
               model.vocabulary().size());
  model.set_metadata("corpus_hash", report.content_hash);
  model.set_metadata("corpus_records", std::to_string(entries.size()));
  if (corpus_hash) *corpus_hash = report.content_hash;
  return model;
}

std::string model_corpus_hash(const NGramModel& m) {
  auto it = m.metadata().find("corpus_hash");
  return it == m.metadata().end() ? "" : it->second;
}

/// Drops trees whose canonical form was already seen.
std::vector<Candidate> unique_candidates(const std::vector<ExprTree>& trees) {
  std::vector<Candidate> out;
  std::unordered_set<std::string> seen;
  for (const auto& t : trees) {
    const auto c = canonical_tree(t);
    auto text = c.canonical();
    if (!seen.insert(text).second) continue;
    out.push_back(Candidate{c, FitResult{}, std::move(text)});
  }
  return out;
}

int fail(int code, const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", {{"code", code}, {"kind", kind}, {"message", message}}}}.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Function priors and model selection for symbolic regression"};
  app.set_version_flag("--version", std::string(kVersion));
  app.set_config("--config", "", "TOML file mirroring the command-line flags");
  app.require_subcommand(1);
  app.fallthrough();

  Global g;
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", g.seed, "Seed for all randomness");
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error, off");

  // train-prior
  auto* train = app.add_subcommand("train-prior", "Train the n-gram function prior on a corpus");
  std::string corpus = default_corpus(), model_out, vocab_basis = "esr+rational";
  int order = 2, k_backoff = 0;
  std::vector<std::string> sources;
  bool lenient = false;
  train->add_option("--corpus", corpus, "Equation corpus")->check(CLI::ExistingFile);
  train->add_option("--order,-n", order, "n-gram order")->check(CLI::PositiveNumber);
  train->add_option("--k", k_backoff, "Back off when a phrase count is <= k")->check(CLI::NonNegativeNumber);
  train->add_option("--source", sources, "Only use records from these sources");
  train->add_option("--vocab-basis", vocab_basis, "Basis whose tokens join the vocabulary");
  train->add_flag("--lenient", lenient, "Skip malformed records instead of failing");
  train->add_option("--out", model_out, "Model JSON")->required();

  // eval-prior
  auto* evalp = app.add_subcommand("eval-prior", "Log-prior of expressions");
  std::string model_path;
  std::vector<std::string> exprs;
  std::string trees_path;
  evalp->add_option("--model", model_path, "Model JSON")->required()->check(CLI::ExistingFile);
  evalp->add_option("--expr", exprs, "Expression(s)");
  evalp->add_option("--trees", trees_path, "JSONL of expressions")->check(CLI::ExistingFile);

  // enumerate
  auto* enumc = app.add_subcommand("enumerate", "All distinct functions up to a complexity");
  std::string basis = "esr", enum_out = "-";
  int max_k = 6;
  enumc->add_option("--basis", basis, "Operator names or preset (esr, rational, corpus, all)");
  enumc->add_option("--max-k", max_k, "Maximum number of nodes")->check(CLI::PositiveNumber);
  enumc->add_option("--out", enum_out, "JSONL output ('-' for stdout)");

  // fit
  auto* fitc = app.add_subcommand("fit", "Fit one expression");
  DataFlags fit_data;
  FitFlags fit_flags;
  std::string fit_expr;
  fit_data.add(fitc);
  fit_flags.add(fitc);
  fitc->add_option("--expr", fit_expr, "Expression")->required();

  // rank
  auto* rankc = app.add_subcommand("rank", "Rank candidate functions");
  DataFlags rank_data;
  FitFlags rank_fit;
  MetricFlags rank_metric;
  std::string rank_trees, rank_model, methods_text = "all", rank_out = "-";
  rank_data.add(rankc);
  rank_fit.add(rankc);
  rank_metric.add(rankc);
  rankc->add_option("--trees", rank_trees, "Candidate JSONL")->required()->check(CLI::ExistingFile);
  rankc->add_option("--model", rank_model, "Function-prior model JSON")->check(CLI::ExistingFile);
  rankc->add_option("--methods", methods_text, "Comma separated methods or 'all'");
  rankc->add_option("--out", rank_out, "Ranking CSV ('-' for stdout)");

  // bench
  auto* benchc = app.add_subcommand("bench", "Benchmark suite with mock data");
  std::string suite = "nguyen-korns", bench_out, bench_model, bench_corpus = default_corpus();
  std::vector<std::string> functions;
  std::vector<std::size_t> n_grid = BenchConfig{}.n_grid;
  std::size_t budget = 0;
  int seeds = 5, bench_k = 6, bench_order = 2;
  std::string bench_methods = "all";
  FitFlags bench_fit;
  MetricFlags bench_metric;
  benchc->add_option("--suite", suite, "Benchmark suite")->check(CLI::IsMember({"nguyen-korns"}));
  benchc->add_option("--functions", functions, "Subset of the suite")->delimiter(',');
  benchc->add_option("--n-grid", n_grid, "Dataset sizes")->delimiter(',');
  benchc->add_option("--budget", budget, "Drop dataset sizes above this N (0 keeps all)");
  benchc->add_option("--seeds", seeds, "Datasets per size")->check(CLI::PositiveNumber);
  benchc->add_option("--max-k", bench_k, "Maximum candidate complexity")->check(CLI::PositiveNumber);
  benchc->add_option("--methods", bench_methods, "Comma separated methods or 'all'");
  benchc->add_option("--model", bench_model, "Function-prior model JSON")->check(CLI::ExistingFile);
  benchc->add_option("--corpus", bench_corpus, "Corpus to train a prior on when --model is absent")
      ->check(CLI::ExistingFile);
  benchc->add_option("--order", bench_order, "Order of that prior")->check(CLI::PositiveNumber);
  benchc->add_option("--out", bench_out, "Output directory")->required();
  bench_fit.add(benchc);
  bench_metric.add(benchc);

  // corpus-report
  auto* reportc = app.add_subcommand("corpus-report", "Check a corpus and summarize it");
  std::string report_corpus = default_corpus();
  bool report_lenient = false;
  reportc->add_option("--corpus", report_corpus, "Equation corpus")->check(CLI::ExistingFile);
  reportc->add_flag("--lenient", report_lenient, "List malformed records instead of failing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(2, "config", e.what());
  }

  auto logger = spdlog::stderr_color_mt("eqprior");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(g.log_level));

  const std::string config_hash = fnv1a_hex(app.config_to_str(true, false));

  try {
    if (train->parsed()) {
      std::string corpus_hash;
      auto model = train_from_corpus(corpus, order, k_backoff, sources, vocab_basis, !lenient, &corpus_hash);
      model.set_metadata("tool_version", kVersion);
      model.set_metadata("config_hash", config_hash);
      model.set_metadata("seed", std::to_string(g.seed));
      model.save(model_out);
      spdlog::info("wrote {}", model_out);
    } else if (evalp->parsed()) {
      const auto model = NGramModel::load(model_path);
      std::vector<std::pair<std::string, ExprTree>> items;
      for (const auto& e : exprs) items.emplace_back(e, parse_expression(e, OperatorBasis::all()));
      if (!trees_path.empty()) {
        for (auto& t : read_trees_jsonl(trees_path)) items.emplace_back(t.to_string(), std::move(t));
      }
      if (items.empty()) throw ConfigError("give --expr or --trees");
      for (const auto& [text, tree] : items) {
        const double lp = log_prior(model, tree);
        if (items.size() == 1) {
          std::cout << fmt_num(lp) << '\n';
        } else {
          std::cout << text << '\t' << fmt_num(lp) << '\n';
        }
      }
    } else if (enumc->parsed()) {
      const auto b = OperatorBasis::parse(basis);
      const auto trees = generate(b, max_k);
      std::ofstream file;
      std::ostream* out = &std::cout;
      if (enum_out != "-") {
        file = open_out(enum_out);
        out = &file;
      }
      json m = meta("enumerate", config_hash, "", g.seed);
      m["basis"] = b.to_string();
      m["max_k"] = max_k;
      m["count"] = trees.size();
      *out << json{{"meta", m}}.dump() << '\n';
      for (const auto& t : trees) {
        *out << json{{"expr", t.canonical()}, {"complexity", t.complexity()}, {"params", t.num_params()}}.dump()
             << '\n';
      }
      spdlog::info("{} functions up to complexity {}", trees.size(), max_k);
    } else if (fitc->parsed()) {
      const Dataset data = fit_data.load();
      const ExprTree tree = parse_expression(fit_expr, OperatorBasis::all());
      const FitResult r = fit_params(tree, data, fit_flags.config(g.seed));
      if (r.status == FitStatus::InvalidDomain) {
        throw NumericalError("no start point gives a finite likelihood");
      }
      json info = json::array();
      for (Eigen::Index i = 0; i < r.info.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < r.info.cols(); ++j) row.push_back(r.info(i, j));
        info.push_back(row);
      }
      std::vector<double> theta(r.theta_hat.data(), r.theta_hat.data() + r.theta_hat.size());
      json out{{"meta", meta("fit", config_hash, "", g.seed)},
               {"expr", tree.to_string()},
               {"canonical", tree.canonical()},
               {"theta_hat", theta},
               {"logL_hat", r.logL_hat},
               {"info", info},
               {"n_data", r.n_data},
               {"status", std::string(to_string(r.status))},
               {"starts", r.starts_run}};
      std::cout << out.dump(2) << '\n';
    } else if (rankc->parsed()) {
      RankConfig rc;
      rc.methods = parse_methods(methods_text);
      rc.metric = rank_metric.options();
      rc.fit = rank_fit.config(g.seed);
      rc.threads = g.threads;
      std::optional<NGramModel> model;
      if (!rank_model.empty()) model = NGramModel::load(rank_model);
      const Dataset data = rank_data.load();
      auto cands = unique_candidates(read_trees_jsonl(rank_trees));
      spdlog::info("fitting {} candidates to {} points", cands.size(), data.size());
      parallel_for(cands.size(), rc.threads, [&](std::size_t i) {
        cands[i].fit = fit_params(cands[i].tree, data, rc.fit);
      });
      const auto values = compute_metrics(cands, model ? &*model : nullptr, data, rc);
      const auto rankings = rank(cands, values, rc.methods);

      std::ofstream file;
      std::ostream* out = &std::cout;
      if (rank_out != "-") {
        file = open_out(rank_out);
        out = &file;
      }
      write_meta_comments(*out, meta("rank", config_hash, model ? model_corpus_hash(*model) : "", g.seed));
      *out << "expr,complexity,params";
      for (auto m : rc.methods) {
        const std::string n(to_string(m));
        *out << ',' << n << ',' << n << "_delta," << n << "_rank," << n << "_valid," << n << "_reason";
      }
      *out << '\n';
      // Rows follow the first method's order, invalid candidates last.
      std::vector<std::size_t> order_idx;
      for (const auto& e : rankings.front().ranked) order_idx.push_back(e.index);
      for (const auto& e : rankings.front().invalid) order_idx.push_back(e.index);
      std::vector<std::vector<std::optional<std::size_t>>> pos(rankings.size(),
                                                              std::vector<std::optional<std::size_t>>(cands.size()));
      std::vector<std::vector<double>> delta(rankings.size(), std::vector<double>(cands.size(), NAN));
      for (std::size_t m = 0; m < rankings.size(); ++m) {
        for (std::size_t r = 0; r < rankings[m].ranked.size(); ++r) {
          pos[m][rankings[m].ranked[r].index] = r + 1;
          delta[m][rankings[m].ranked[r].index] = rankings[m].ranked[r].delta;
        }
      }
      for (auto i : order_idx) {
        const auto& c = cands[i];
        *out << csv_field(c.canonical) << ',' << c.tree.complexity() << ',' << c.tree.num_params();
        for (std::size_t m = 0; m < rankings.size(); ++m) {
          const auto& v = values[m][i];
          *out << ',' << (v.valid ? fmt_num(v.value) : "") << ',' << fmt_num(delta[m][i]) << ','
               << (pos[m][i] ? std::to_string(*pos[m][i]) : "") << ',' << (v.valid ? 1 : 0) << ','
               << csv_field(v.reason);
        }
        *out << '\n';
      }
    } else if (benchc->parsed()) {
      BenchConfig bc;
      bc.functions = functions;
      if (budget > 0) std::erase_if(n_grid, [&](std::size_t n) { return n > budget; });
      if (n_grid.empty()) throw ConfigError("--budget leaves no dataset size to run");
      bc.n_grid = n_grid;
      bc.seeds = seeds;
      bc.seed = g.seed;
      bc.max_complexity = bench_k;
      bc.rank.methods = parse_methods(bench_methods);
      bc.rank.metric = bench_metric.options();
      bc.rank.fit = bench_fit.config(g.seed);
      bc.rank.threads = g.threads;

      std::optional<NGramModel> model;
      std::string corpus_hash;
      const bool need_lm = std::any_of(bc.rank.methods.begin(), bc.rank.methods.end(), uses_language_model);
      if (!bench_model.empty()) {
        model = NGramModel::load(bench_model);
        corpus_hash = model_corpus_hash(*model);
      } else if (need_lm) {
        model = train_from_corpus(bench_corpus, bench_order, 0, {}, "esr+rational", true, &corpus_hash);
      }
      const auto candidates = generate(OperatorBasis::preset("esr"), bench_k);
      spdlog::info("{} candidate functions up to complexity {}", candidates.size(), bench_k);
      const auto rows = run_bench(bc, candidates, model ? &*model : nullptr, [](const BenchRow& r) {
        spdlog::info("{} N={} seed#{} {}: truth rank {} delta {} ({:.1f}s)", r.benchmark, r.n, r.seed_index,
                     to_string(r.outcome.method),
                     r.outcome.truth_rank ? std::to_string(*r.outcome.truth_rank) : "-",
                     r.outcome.delta ? fmt_num(*r.outcome.delta) : "-", r.seconds);
      });
      fs::create_directories(bench_out);
      const json m = meta("bench", config_hash, corpus_hash, g.seed);
      {
        auto out = open_out(fs::path(bench_out) / "runs.csv");
        write_meta_comments(out, m);
        write_rows_csv(out, rows);
      }
      {
        auto out = open_out(fs::path(bench_out) / "aggregate.csv");
        write_meta_comments(out, m);
        write_aggregate_csv(out, rows);
      }
      spdlog::info("wrote {}/runs.csv and aggregate.csv", bench_out);
    } else if (reportc->parsed()) {
      LoadOptions lo;
      lo.strict = !report_lenient;
      LoadReport report;
      load_corpus(report_corpus, lo, &report);
      std::cout << report_json(report) << '\n';
    }
  } catch (const ConfigError& e) {
    return fail(2, "config", e.what());
  } catch (const DataError& e) {
    return fail(3, "data", e.what());
  } catch (const NumericalError& e) {
    return fail(4, "numerical", e.what());
  } catch (const std::exception& e) {
    return fail(1, "internal", e.what());
  }
  return 0;
}
