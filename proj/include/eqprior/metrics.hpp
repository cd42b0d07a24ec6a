#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "eqprior/exprtree.hpp"
#include "eqprior/fit.hpp"

namespace eqprior {

class NGramModel;

enum class Method { Likelihood, Score, Mdl, MdlLm, MdlFbfLm, BayesFbfLm };

std::string_view to_string(Method m);
/// Comma separated method names, or "all". Throws ConfigError.
std::vector<Method> parse_methods(std::string_view text);
std::vector<Method> all_methods();
bool uses_language_model(Method m);

struct MetricPart {
  std::string label;
  double value = 0.0;
};

/// One model-selection value; smaller is better for every method.
struct MetricValue {
  Method method = Method::Likelihood;
  double value = 0.0;
  std::vector<MetricPart> parts;
  bool valid = true;
  std::string reason;  // why the value is invalid
  std::string note;    // adjustments made while computing it

  double part(std::string_view label) const;
  static MetricValue invalid(Method m, std::string why);
};

enum class Lattice { Rectangular, Optimal };

/// log nu_p of the parameter quantization lattice. The optimal lattice is
/// exact for p = 1 and uses the large-p limit of kappa_p otherwise.
double log_nu(int p, Lattice lattice = Lattice::Rectangular);

struct FbfConfig {
  enum class Rule { InvSqrtN, LogNOverN };
  Rule rule = Rule::InvSqrtN;
  /// Fixed training fraction; overrides the rule when set.
  std::optional<double> b;

  double fraction(std::size_t n_data) const;
};

struct MetricOptions {
  FbfConfig fbf;
  Lattice lattice = Lattice::Rectangular;
  /// Keep (p/2) log nu_p in the FBF description length.
  bool fbf_keep_nu = true;
  /// Set parameters with negative codelength to zero and refit (MDL methods).
  bool zero_tiny_params = true;
};

// ---------------------------------------------------------------------------
// Building blocks

/// log H + (p/2) log 2 pi - (1/2) log det I. Throws NumericalError unless
/// info is positive-definite.
double laplace_log_evidence(double log_H_hat, const Eigen::MatrixXd& info);

/// (1 - b) log L + (p/2) log b. Throws ConfigError unless 0 < b <= 1.
double fbf_log_evidence(double logL_hat, int p, double b);

/// Value at the maximum of the fractional prior built from a uniform base
/// prior: -b log L - (p/2) log 2 pi + (1/2) log det(b I).
double fbf_log_param_prior(double logL_hat, const Eigen::MatrixXd& info, double b);

double log_det_spd(const Eigen::MatrixXd& m);
/// Sum of log c over the tree's integer constants.
double log_constants(const ExprTree& tree);

/// Codelength with k log n as the function prior, or -log_fn_prior when given.
/// Parameters with negative codelength are zeroed and the tree refit when
/// opts.zero_tiny_params is set; `data` and `fit_cfg` are needed for that.
MetricValue description_length_esr(const ExprTree& tree, const FitResult& fit,
                                   const Dataset* data = nullptr, const FitConfig& fit_cfg = {},
                                   std::optional<double> log_fn_prior = std::nullopt,
                                   const MetricOptions& opts = {});

/// Lattice codelength -log H + (1/2) log det I + (p/2) log nu - log_fn_prior + sum log c,
/// with log H = log L + log_param_prior. `info` replaces fit.info when given.
MetricValue description_length_lattice(const ExprTree& tree, const FitResult& fit,
                                       double log_fn_prior, double log_nu_p,
                                       double log_param_prior = 0.0,
                                       const Eigen::MatrixXd* info = nullptr);

/// -(1-b) log L + (p/2)(log 2 pi - log b + log nu) - log_fn_prior + sum log c.
MetricValue fbf_description_length(const ExprTree& tree, const FitResult& fit,
                                   double log_fn_prior, double b, double log_nu_p);

/// -fbf_log_evidence - log_fn_prior.
MetricValue bayes_fbf(const ExprTree& tree, const FitResult& fit, double log_fn_prior, double b);

/// Scores (log-likelihood gain per unit complexity) of each point, empty for
/// points off the Pareto front and for the first front member.
std::vector<std::optional<double>> pareto_score(const std::vector<std::pair<int, double>>& points);

// ---------------------------------------------------------------------------
// Ranking

struct RankEntry {
  std::size_t index = 0;  // into the candidate list
  MetricValue metric;
  double delta = 0.0;  // metric minus the best valid metric
};

struct MethodRanking {
  Method method = Method::Likelihood;
  std::vector<RankEntry> ranked;   // best first, one per canonical family
  std::vector<RankEntry> invalid;  // with reasons

  /// Position (0-based) of the candidate in `ranked`, if present.
  std::optional<std::size_t> position(std::size_t index) const;
};

struct Candidate {
  ExprTree tree;
  FitResult fit;
  std::string canonical;
};

struct RankConfig {
  std::vector<Method> methods = all_methods();
  MetricOptions metric;
  FitConfig fit;
  int threads = 1;
};

/// Every method's values for every candidate: result[method][candidate].
std::vector<std::vector<MetricValue>> compute_metrics(const std::vector<Candidate>& candidates,
                                                      const NGramModel* model, const Dataset& data,
                                                      const RankConfig& cfg);

/// Sorts each method's valid values ascending; ties go to lower complexity,
/// then canonical text. Only the best variant of each canonical family is kept.
std::vector<MethodRanking> rank(const std::vector<Candidate>& candidates,
                                const std::vector<std::vector<MetricValue>>& values,
                                const std::vector<Method>& methods);

/// Fits and ranks in one go.
std::vector<MethodRanking> rank(const std::vector<Candidate>& candidates, const NGramModel* model,
                                const Dataset& data, const RankConfig& cfg);

}  // namespace eqprior
