#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "eqprior/exprtree.hpp"

namespace eqprior {

// ---------------------------------------------------------------------------
// Randomness

/// Counter-based generator: the i-th draw depends only on (key, i), so a
/// stream can be split by key without coordinating between threads.
class Rng {
 public:
  using result_type = std::uint64_t;
  explicit Rng(std::uint64_t key) : key_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()();

  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);
/// Key for an independent substream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

// ---------------------------------------------------------------------------
// Data and likelihood

class Dataset {
 public:
  /// Independent Gaussian noise of standard deviation sigma.
  static Dataset iid(Eigen::MatrixXd x, Eigen::VectorXd y, double sigma);
  /// Correlated Gaussian noise. Throws DataError unless cov is symmetric
  /// positive-definite.
  static Dataset full_cov(Eigen::MatrixXd x, Eigen::VectorXd y, const Eigen::MatrixXd& cov);

  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::VectorXd& y() const { return y_; }
  std::size_t size() const { return static_cast<std::size_t>(y_.size()); }
  bool is_iid() const { return !cov_; }
  double sigma() const { return sigma_; }

  /// Residuals mapped to unit-variance independent form, in place.
  void whiten(Eigen::VectorXd& r) const;
  /// -1/2 log det(2 pi Sigma).
  double log_normalization() const { return log_norm_; }

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  double sigma_ = 1.0;
  std::optional<Eigen::LLT<Eigen::MatrixXd>> cov_;
  double log_norm_ = 0.0;
};

/// Gaussian log-likelihood with its normalization; -inf when any prediction
/// is not finite.
double log_likelihood(const ExprTree& tree, std::span<const double> theta, const Dataset& data,
                      EvalOptions eval = {});

// ---------------------------------------------------------------------------
// Optimization

enum class FitStatus { Ok, DegenerateInfo, NoConvergence, InvalidDomain };
std::string_view to_string(FitStatus s);

struct FitConfig {
  int restarts = 20;
  std::uint64_t seed = 0;
  int max_iters = 200;
  double tol = 1e-10;
  /// Stop once the best optimum has been reached this many times.
  int agree = 3;
  EvalOptions eval{};
};

struct FitResult {
  Eigen::VectorXd theta_hat;
  double logL_hat = -std::numeric_limits<double>::infinity();
  /// Observed information over the free parameters, in the order of `free`.
  Eigen::MatrixXd info;
  /// Indices of parameters that were optimized; the rest were held fixed.
  std::vector<int> free;
  std::size_t n_data = 0;
  FitStatus status = FitStatus::InvalidDomain;
  int starts_run = 0;

  bool usable() const { return status == FitStatus::Ok || status == FitStatus::NoConvergence; }
};

/// Parameters held at a given value during a fit: (slot, value).
using FixedParams = std::vector<std::pair<int, double>>;

/// Multi-start maximum-likelihood fit. Gaussian likelihoods are minimized as
/// least squares (Levenberg-Marquardt on whitened residuals). Deterministic
/// given config.seed and the tree's canonical form.
FitResult fit_params(const ExprTree& tree, const Dataset& data, const FitConfig& config,
                     const FixedParams& fixed = {});

using LogDensity = std::function<double(const Eigen::VectorXd&)>;

struct MaximizeResult {
  Eigen::VectorXd x;
  double value = -std::numeric_limits<double>::infinity();
  bool converged = false;
};

/// Generic local maximization: Nelder-Mead, then BFGS with finite-difference
/// gradients. Non-finite values are replaced by a large penalty.
MaximizeResult maximize(const LogDensity& f, const Eigen::VectorXd& start, int max_iters = 2000,
                        double tol = 1e-10);

/// -Hessian of f at x by central differences with one Richardson step.
/// Symmetrized. Entries are NaN when f cannot be evaluated near x.
Eigen::MatrixXd negative_hessian(const LogDensity& f, const Eigen::VectorXd& x);

/// Observed information of the log-likelihood (plus log_prior when given) at
/// theta, over the listed free parameters (all when empty).
Eigen::MatrixXd observed_information(const ExprTree& tree, const Eigen::VectorXd& theta,
                                     const Dataset& data, EvalOptions eval = {},
                                     const LogDensity& log_prior = {},
                                     const std::vector<int>& free = {});

/// True when the matrix is finite with a strictly positive diagonal.
bool information_ok(const Eigen::MatrixXd& info);

// ---------------------------------------------------------------------------
// Parallelism

/// Calls fn(i) for i in [0, n) on up to `threads` workers (0 = hardware).
/// Results must be written by index for deterministic output.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace eqprior
