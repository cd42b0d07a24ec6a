#include "eqprior/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numbers>
#include <unordered_set>

#include <Eigen/Cholesky>

#include "eqprior/errors.hpp"
#include "eqprior/ngram.hpp"

namespace eqprior {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

struct MethodName {
  Method method;
  std::string_view name;
};

constexpr MethodName kMethods[] = {
    {Method::Likelihood, "likelihood"}, {Method::Score, "score"},
    {Method::Mdl, "mdl"},               {Method::MdlLm, "mdl_lm"},
    {Method::MdlFbfLm, "mdl_fbf_lm"},   {Method::BayesFbfLm, "bayes_fbf_lm"},
};

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

MetricValue make_value(Method m, double accuracy, double parameters, double structure) {
  MetricValue v;
  v.method = m;
  v.parts = {{"accuracy", accuracy}, {"parameters", parameters}, {"structure", structure}};
  v.value = accuracy + parameters + structure;
  if (!std::isfinite(v.value)) {
    v.valid = false;
    v.reason = "non-finite value";
  }
  return v;
}

std::string fit_problem(const FitResult& fit) {
  return "fit status " + std::string(to_string(fit.status));
}

}  // namespace

std::string_view to_string(Method m) {
  for (const auto& e : kMethods) {
    if (e.method == m) return e.name;
  }
  return "?";
}

std::vector<Method> all_methods() {
  std::vector<Method> out;
  for (const auto& e : kMethods) out.push_back(e.method);
  return out;
}

std::vector<Method> parse_methods(std::string_view text) {
  std::vector<Method> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    auto item = lower(text.substr(start, comma == std::string_view::npos ? text.npos : comma - start));
    item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }),
               item.end());
    std::replace(item.begin(), item.end(), '+', '_');
    std::replace(item.begin(), item.end(), '-', '_');
    if (item == "all") {
      for (auto m : all_methods()) {
        if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
      }
    } else if (!item.empty()) {
      auto it = std::find_if(std::begin(kMethods), std::end(kMethods),
                             [&](const MethodName& e) { return e.name == item; });
      if (it == std::end(kMethods)) throw ConfigError("unknown method '" + item + "'");
      if (std::find(out.begin(), out.end(), it->method) == out.end()) out.push_back(it->method);
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw ConfigError("no methods given");
  return out;
}

bool uses_language_model(Method m) {
  return m == Method::MdlLm || m == Method::MdlFbfLm || m == Method::BayesFbfLm;
}

double MetricValue::part(std::string_view label) const {
  for (const auto& p : parts) {
    if (p.label == label) return p.value;
  }
  return 0.0;
}

MetricValue MetricValue::invalid(Method m, std::string why) {
  MetricValue v;
  v.method = m;
  v.valid = false;
  v.value = std::numeric_limits<double>::quiet_NaN();
  v.reason = std::move(why);
  return v;
}

double log_nu(int p, Lattice lattice) {
  if (lattice == Lattice::Rectangular || p <= 0) return 1.0 - std::log(3.0);
  const double kappa = p == 1 ? 1.0 / 12.0 : 1.0 / (2.0 * std::numbers::pi * std::numbers::e);
  return 1.0 + std::log(4.0 * kappa);
}

double FbfConfig::fraction(std::size_t n_data) const {
  if (b) return *b;
  const double n = static_cast<double>(n_data);
  return rule == Rule::InvSqrtN ? 1.0 / std::sqrt(n) : std::log(n) / n;
}

// ---------------------------------------------------------------------------

double log_det_spd(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success || !m.allFinite()) {
    throw NumericalError("matrix is not positive-definite");
  }
  const Eigen::MatrixXd L = llt.matrixL();
  return 2.0 * L.diagonal().array().log().sum();
}

double laplace_log_evidence(double log_H_hat, const Eigen::MatrixXd& info) {
  const auto p = static_cast<double>(info.rows());
  return log_H_hat + 0.5 * p * kLog2Pi - 0.5 * log_det_spd(info);
}

double fbf_log_evidence(double logL_hat, int p, double b) {
  if (!(b > 0.0 && b <= 1.0)) throw ConfigError("FBF fraction b must lie in (0, 1]");
  return (1.0 - b) * logL_hat + 0.5 * p * std::log(b);
}

double fbf_log_param_prior(double logL_hat, const Eigen::MatrixXd& info, double b) {
  const auto p = static_cast<double>(info.rows());
  // log det(b I) = p log b + log det I, without refactorizing the scaled matrix.
  return -b * logL_hat - 0.5 * p * kLog2Pi + 0.5 * (p * std::log(b) + log_det_spd(info));
}

double log_constants(const ExprTree& tree) {
  double s = 0.0;
  for (auto c : tree.int_constants()) s += std::log(static_cast<double>(c));
  return s;
}

MetricValue description_length_esr(const ExprTree& tree, const FitResult& fit, const Dataset* data,
                                   const FitConfig& fit_cfg, std::optional<double> log_fn_prior,
                                   const MetricOptions& opts) {
  const Method method = log_fn_prior ? Method::MdlLm : Method::Mdl;
  if (!fit.usable()) return MetricValue::invalid(method, fit_problem(fit));
  if (log_fn_prior && !std::isfinite(*log_fn_prior)) {
    return MetricValue::invalid(method, "function prior is not finite");
  }

  const double k = static_cast<double>(tree.complexity());
  const double n = static_cast<double>(tree.num_operators());
  const double structure = (log_fn_prior ? -*log_fn_prior : k * std::log(n)) + log_constants(tree);

  const FitResult* cur = &fit;
  FitResult refit;
  std::vector<int> zeroed;
  const double half_log3 = 0.5 * std::log(3.0);
  std::string note;

  for (std::size_t round = 0; round <= tree.num_params(); ++round) {
    if (!information_ok(cur->info)) return MetricValue::invalid(method, "parameter information not positive");
    std::vector<int> tiny;
    for (std::size_t i = 0; i < cur->free.size(); ++i) {
      const double th = cur->theta_hat[cur->free[i]];
      const double cl = 0.5 * std::log(cur->info(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i))) +
                        std::log(std::abs(th)) - half_log3;
      if (cl < 0.0) tiny.push_back(cur->free[i]);
    }
    if (tiny.empty() || !opts.zero_tiny_params || !data) break;

    FixedParams fixed;
    for (int z : zeroed) fixed.emplace_back(z, 0.0);
    for (int z : tiny) fixed.emplace_back(z, 0.0);
    FitResult next = fit_params(tree, *data, fit_cfg, fixed);
    if (!next.usable() || !std::isfinite(next.logL_hat)) {
      note = "zeroing rejected";
      break;
    }
    zeroed.insert(zeroed.end(), tiny.begin(), tiny.end());
    refit = std::move(next);
    cur = &refit;
  }

  double parameters = 0.0;
  for (std::size_t i = 0; i < cur->free.size(); ++i) {
    const double th = cur->theta_hat[cur->free[i]];
    parameters += 0.5 * std::log(cur->info(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i))) +
                  std::log(std::abs(th)) - half_log3;
  }
  MetricValue v = make_value(method, -cur->logL_hat, parameters, structure);
  if (!zeroed.empty()) {
    std::sort(zeroed.begin(), zeroed.end());
    note = "zeroed";
    for (int z : zeroed) note += " a" + std::to_string(z);
  }
  v.note = note;
  return v;
}

MetricValue description_length_lattice(const ExprTree& tree, const FitResult& fit,
                                       double log_fn_prior, double log_nu_p, double log_param_prior,
                                       const Eigen::MatrixXd* info) {
  const Method method = Method::MdlLm;
  if (!fit.usable()) return MetricValue::invalid(method, fit_problem(fit));
  const Eigen::MatrixXd& I = info ? *info : fit.info;
  double log_det = 0.0;
  try {
    log_det = log_det_spd(I);
  } catch (const NumericalError&) {
    return MetricValue::invalid(method, "information not positive-definite");
  }
  const auto p = static_cast<double>(I.rows());
  return make_value(method, -fit.logL_hat, -log_param_prior + 0.5 * log_det + 0.5 * p * log_nu_p,
                    -log_fn_prior + log_constants(tree));
}

MetricValue fbf_description_length(const ExprTree& tree, const FitResult& fit, double log_fn_prior,
                                   double b, double log_nu_p) {
  const Method method = Method::MdlFbfLm;
  if (!std::isfinite(fit.logL_hat)) return MetricValue::invalid(method, fit_problem(fit));
  if (!(b > 0.0 && b < 1.0)) return MetricValue::invalid(method, "FBF fraction must be in (0, 1)");
  const auto p = static_cast<double>(fit.free.size());
  return make_value(method, -(1.0 - b) * fit.logL_hat,
                    0.5 * p * (kLog2Pi - std::log(b) + log_nu_p),
                    -log_fn_prior + log_constants(tree));
}

MetricValue bayes_fbf(const ExprTree& tree, const FitResult& fit, double log_fn_prior, double b) {
  (void)tree;
  const Method method = Method::BayesFbfLm;
  if (!std::isfinite(fit.logL_hat)) return MetricValue::invalid(method, fit_problem(fit));
  if (!(b > 0.0 && b < 1.0)) return MetricValue::invalid(method, "FBF fraction must be in (0, 1)");
  const auto p = static_cast<double>(fit.free.size());
  return make_value(method, -(1.0 - b) * fit.logL_hat, -0.5 * p * std::log(b), -log_fn_prior);
}

std::vector<std::optional<double>> pareto_score(const std::vector<std::pair<int, double>>& points) {
  std::vector<std::optional<double>> out(points.size());
  std::map<int, std::size_t> best;  // complexity -> index of highest log-likelihood
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!std::isfinite(points[i].second)) continue;
    auto [it, fresh] = best.emplace(points[i].first, i);
    if (!fresh && points[i].second > points[it->second].second) it->second = i;
  }
  std::optional<std::size_t> prev;
  for (const auto& [c, i] : best) {
    if (prev && points[i].second <= points[*prev].second) continue;
    if (prev) {
      out[i] = (points[i].second - points[*prev].second) /
               static_cast<double>(c - points[*prev].first);
    }
    prev = i;
  }
  return out;
}

// ---------------------------------------------------------------------------

std::optional<std::size_t> MethodRanking::position(std::size_t index) const {
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (ranked[i].index == index) return i;
  }
  return std::nullopt;
}

std::vector<std::vector<MetricValue>> compute_metrics(const std::vector<Candidate>& candidates,
                                                      const NGramModel* model, const Dataset& data,
                                                      const RankConfig& cfg) {
  const auto& methods = cfg.methods;
  const bool need_lm = std::any_of(methods.begin(), methods.end(), uses_language_model);
  if (need_lm && !model) throw ConfigError("language-model methods need a trained model");

  const double b = cfg.metric.fbf.fraction(data.size());
  std::vector<std::vector<MetricValue>> out(methods.size(), std::vector<MetricValue>(candidates.size()));

  parallel_for(candidates.size(), cfg.threads, [&](std::size_t i) {
    const Candidate& c = candidates[i];
    std::optional<double> lp;
    std::string lp_problem;
    if (need_lm) {
      try {
        lp = log_prior(*model, c.tree);
      } catch (const OutOfVocabulary& e) {
        lp_problem = e.what();
      }
      // A phrase unseen in a context that reserves no mass has probability 0.
      if (lp && !std::isfinite(*lp)) {
        lp.reset();
        lp_problem = "zero function prior";
      }
    }
    for (std::size_t m = 0; m < methods.size(); ++m) {
      const Method method = methods[m];
      MetricValue v;
      if (uses_language_model(method) && !lp) {
        v = MetricValue::invalid(method, lp_problem);
      } else {
        switch (method) {
          case Method::Likelihood:
            v = std::isfinite(c.fit.logL_hat) ? make_value(method, -c.fit.logL_hat, 0.0, 0.0)
                                              : MetricValue::invalid(method, fit_problem(c.fit));
            break;
          case Method::Score:
            break;  // needs every candidate; filled in below
          case Method::Mdl:
            v = description_length_esr(c.tree, c.fit, &data, cfg.fit, std::nullopt, cfg.metric);
            break;
          case Method::MdlLm:
            v = description_length_esr(c.tree, c.fit, &data, cfg.fit, lp, cfg.metric);
            break;
          case Method::MdlFbfLm: {
            const double nu = cfg.metric.fbf_keep_nu
                                  ? log_nu(static_cast<int>(c.fit.free.size()), cfg.metric.lattice)
                                  : 0.0;
            v = fbf_description_length(c.tree, c.fit, *lp, b, nu);
            break;
          }
          case Method::BayesFbfLm:
            v = bayes_fbf(c.tree, c.fit, *lp, b);
            break;
        }
      }
      v.method = method;
      out[m][i] = std::move(v);
    }
  });

  for (std::size_t m = 0; m < methods.size(); ++m) {
    if (methods[m] != Method::Score) continue;
    std::vector<std::pair<int, double>> pts;
    for (const auto& c : candidates) {
      pts.emplace_back(static_cast<int>(c.tree.complexity()), c.fit.logL_hat);
    }
    const auto scores = pareto_score(pts);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (!std::isfinite(candidates[i].fit.logL_hat)) {
        out[m][i] = MetricValue::invalid(Method::Score, fit_problem(candidates[i].fit));
      } else if (!scores[i]) {
        out[m][i] = MetricValue::invalid(Method::Score, "no score off the Pareto front interior");
      } else {
        MetricValue v;
        v.method = Method::Score;
        v.value = -std::log(*scores[i]);
        v.parts = {{"log_score", std::log(*scores[i])}};
        out[m][i] = std::move(v);
      }
    }
  }
  return out;
}

std::vector<MethodRanking> rank(const std::vector<Candidate>& candidates,
                                const std::vector<std::vector<MetricValue>>& values,
                                const std::vector<Method>& methods) {
  std::vector<MethodRanking> out;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    MethodRanking r;
    r.method = methods[m];
    std::vector<RankEntry> valid;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      RankEntry e{i, values[m][i], 0.0};
      (e.metric.valid ? valid : r.invalid).push_back(std::move(e));
    }
    std::sort(valid.begin(), valid.end(), [&](const RankEntry& a, const RankEntry& b) {
      if (a.metric.value != b.metric.value) return a.metric.value < b.metric.value;
      const auto ca = candidates[a.index].tree.complexity();
      const auto cb = candidates[b.index].tree.complexity();
      if (ca != cb) return ca < cb;
      return candidates[a.index].canonical < candidates[b.index].canonical;
    });
    std::unordered_set<std::string> families;
    for (auto& e : valid) {
      if (!families.insert(candidates[e.index].canonical).second) continue;
      e.delta = e.metric.value - (r.ranked.empty() ? e.metric.value : r.ranked.front().metric.value);
      r.ranked.push_back(std::move(e));
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<MethodRanking> rank(const std::vector<Candidate>& candidates, const NGramModel* model,
                                const Dataset& data, const RankConfig& cfg) {
  return rank(candidates, compute_metrics(candidates, model, data, cfg), cfg.methods);
}

}  // namespace eqprior
