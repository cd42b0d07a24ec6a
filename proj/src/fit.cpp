#include "eqprior/fit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <thread>

#include <Eigen/Dense>

#include "eqprior/errors.hpp"
#include "eqprior/hash.hpp"

namespace eqprior {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPenalty = 1e10;

}  // namespace

// ---------------------------------------------------------------------------
// Randomness

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) { return mix64(mix64(seed) ^ tag); }

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  return derive_seed(seed, fnv1a64(tag));
}

Rng::result_type Rng::operator()() { return mix64(key_ ^ mix64(counter_++)); }

double Rng::uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  // Box-Muller; one draw per call keeps the counter-to-value map simple.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// ---------------------------------------------------------------------------
// Data and likelihood

Dataset Dataset::iid(Eigen::MatrixXd x, Eigen::VectorXd y, double sigma) {
  if (y.size() < 1) throw DataError("dataset needs at least one point");
  if (x.rows() != y.size()) throw DataError("x and y have different numbers of rows");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DataError("noise sigma must be positive");
  Dataset d;
  d.x_ = std::move(x);
  d.y_ = std::move(y);
  d.sigma_ = sigma;
  d.log_norm_ = -0.5 * static_cast<double>(d.y_.size()) *
                std::log(2.0 * std::numbers::pi * sigma * sigma);
  return d;
}

Dataset Dataset::full_cov(Eigen::MatrixXd x, Eigen::VectorXd y, const Eigen::MatrixXd& cov) {
  if (y.size() < 1) throw DataError("dataset needs at least one point");
  if (x.rows() != y.size()) throw DataError("x and y have different numbers of rows");
  if (cov.rows() != y.size() || cov.cols() != y.size()) throw DataError("covariance must be N x N");
  if (!cov.isApprox(cov.transpose(), 1e-12)) throw DataError("covariance is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw DataError("covariance is not positive-definite");
  Dataset d;
  d.x_ = std::move(x);
  d.y_ = std::move(y);
  const Eigen::VectorXd diag = llt.matrixL().toDenseMatrix().diagonal();
  const double log_det = 2.0 * diag.array().log().sum();
  d.log_norm_ = -0.5 * (static_cast<double>(d.y_.size()) * std::log(2.0 * std::numbers::pi) + log_det);
  d.cov_ = std::move(llt);
  return d;
}

void Dataset::whiten(Eigen::VectorXd& r) const {
  if (cov_) {
    cov_->matrixL().solveInPlace(r);
  } else {
    r /= sigma_;
  }
}

double log_likelihood(const ExprTree& tree, std::span<const double> theta, const Dataset& data,
                      EvalOptions eval) {
  Evaluator ev(tree, eval);
  const auto& pred = ev(theta, data.x());
  if (!pred.allFinite()) return -kInf;
  Eigen::VectorXd r = data.y() - pred.matrix();
  data.whiten(r);
  return -0.5 * r.squaredNorm() + data.log_normalization();
}

std::string_view to_string(FitStatus s) {
  switch (s) {
    case FitStatus::Ok: return "ok";
    case FitStatus::DegenerateInfo: return "degenerate_info";
    case FitStatus::NoConvergence: return "no_convergence";
    case FitStatus::InvalidDomain: return "invalid_domain";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Least squares

namespace {

// Whitened residuals as a function of the free parameters.
class Residuals {
 public:
  Residuals(const ExprTree& tree, const Dataset& data, EvalOptions eval,
            const FixedParams& fixed, std::vector<int> free)
      : data_(data), ev_(tree, eval), theta_(tree.num_params(), 0.0), free_(std::move(free)) {
    for (const auto& [slot, v] : fixed) theta_[static_cast<std::size_t>(slot)] = v;
  }

  std::size_t dim() const { return free_.size(); }

  Eigen::VectorXd full(const Eigen::VectorXd& z) {
    for (std::size_t i = 0; i < free_.size(); ++i) {
      theta_[static_cast<std::size_t>(free_[i])] = z[static_cast<Eigen::Index>(i)];
    }
    return Eigen::Map<const Eigen::VectorXd>(theta_.data(), static_cast<Eigen::Index>(theta_.size()));
  }

  // Returns half the squared norm, or +inf when the model cannot be evaluated.
  double operator()(const Eigen::VectorXd& z, Eigen::VectorXd& r) {
    full(z);
    const auto& pred = ev_(theta_, data_.x());
    if (!pred.allFinite()) return kInf;
    r = data_.y() - pred.matrix();
    data_.whiten(r);
    return 0.5 * r.squaredNorm();
  }

 private:
  const Dataset& data_;
  Evaluator ev_;
  std::vector<double> theta_;
  std::vector<int> free_;
};

struct LmOutcome {
  Eigen::VectorXd z;
  double cost = kInf;
  bool converged = false;
};

LmOutcome levenberg_marquardt(Residuals& res, Eigen::VectorXd z, int max_iters, double tol) {
  const auto q = static_cast<Eigen::Index>(res.dim());
  Eigen::VectorXd r, rt;
  double cost = res(z, r);
  LmOutcome out;
  if (!std::isfinite(cost)) return out;

  Eigen::MatrixXd J(r.size(), q);
  double lambda = 1e-3;
  bool converged = false;
  for (int iter = 0; iter < max_iters && !converged; ++iter) {
    for (Eigen::Index j = 0; j < q; ++j) {
      const double h = 1.5e-8 * std::max(std::abs(z[j]), 1.0);
      Eigen::VectorXd zt = z;
      zt[j] += h;
      double c = res(zt, rt);
      double step = h;
      if (!std::isfinite(c)) {
        zt[j] = z[j] - h;
        c = res(zt, rt);
        step = -h;
      }
      if (std::isfinite(c)) {
        J.col(j) = (r - rt) / step;  // d(pred)/dz in whitened units
      } else {
        J.col(j).setZero();
      }
    }
    // r = y - f, so the gradient of the cost is -J^T r with J = df/dz.
    const Eigen::MatrixXd A = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() <= tol * (1.0 + cost)) {
      converged = true;
      break;
    }
    const double dmax = std::max(A.diagonal().maxCoeff(), 1e-300);
    bool moved = false;
    while (lambda < 1e16) {
      Eigen::MatrixXd M = A;
      for (Eigen::Index i = 0; i < q; ++i) M(i, i) += lambda * std::max(A(i, i), 1e-12 * dmax);
      const Eigen::VectorXd delta = M.ldlt().solve(g);
      if (!delta.allFinite()) {
        lambda *= 4.0;
        continue;
      }
      const Eigen::VectorXd zn = z + delta;
      const double cn = res(zn, rt);
      if (cn < cost) {
        const double gain = (cost - cn) / std::max(cost, 1e-300);
        const bool small_step = delta.norm() <= tol * (z.norm() + tol);
        z = zn;
        r.swap(rt);
        cost = cn;
        lambda = std::max(lambda / 3.0, 1e-12);
        moved = true;
        if (gain < tol || small_step) converged = true;
        break;
      }
      lambda *= 4.0;
    }
    if (!moved) converged = true;  // no descent direction left at this resolution
  }
  out.z = std::move(z);
  out.cost = cost;
  out.converged = converged;
  return out;
}

Eigen::VectorXd random_start(Rng& rng, Eigen::Index q) {
  Eigen::VectorXd z(q);
  for (Eigen::Index i = 0; i < q; ++i) {
    const double mag = std::pow(10.0, rng.uniform(-3.0, 3.0));
    z[i] = rng.uniform() < 0.5 ? -mag : mag;
  }
  return z;
}

}  // namespace

FitResult fit_params(const ExprTree& tree, const Dataset& data, const FitConfig& config,
                     const FixedParams& fixed) {
  FitResult result;
  result.n_data = data.size();
  const int p = static_cast<int>(tree.num_params());

  std::vector<bool> is_fixed(static_cast<std::size_t>(p), false);
  for (const auto& [slot, v] : fixed) {
    if (slot < 0 || slot >= p) throw std::invalid_argument("fixed parameter slot out of range");
    is_fixed[static_cast<std::size_t>(slot)] = true;
  }
  for (int i = 0; i < p; ++i) {
    if (!is_fixed[static_cast<std::size_t>(i)]) result.free.push_back(i);
  }

  Residuals res(tree, data, config.eval, fixed, result.free);
  const auto q = static_cast<Eigen::Index>(result.free.size());

  if (q == 0) {
    result.theta_hat = res.full(Eigen::VectorXd());
    result.logL_hat = log_likelihood(tree, std::span<const double>(result.theta_hat.data(), static_cast<std::size_t>(p)), data, config.eval);
    result.info.resize(0, 0);
    result.status = std::isfinite(result.logL_hat) ? FitStatus::Ok : FitStatus::InvalidDomain;
    return result;
  }

  std::vector<Eigen::VectorXd> fixed_starts;
  fixed_starts.push_back(Eigen::VectorXd::Ones(q));
  const auto hints = tree.param_hints();
  if (!hints.empty()) {
    Eigen::VectorXd h(q);
    bool any = false;
    for (Eigen::Index i = 0; i < q; ++i) {
      const double v = hints[static_cast<std::size_t>(result.free[static_cast<std::size_t>(i)])];
      any = any || std::isfinite(v);
      h[i] = std::isfinite(v) ? v : 1.0;
    }
    if (any) fixed_starts.push_back(h);
  }

  Rng rng(derive_seed(config.seed, tree.canonical()));
  LmOutcome best;
  int hits = 0;
  const int restarts = std::max(config.restarts, 1);
  for (int s = 0; s < restarts; ++s) {
    const Eigen::VectorXd start = static_cast<std::size_t>(s) < fixed_starts.size()
                                      ? fixed_starts[static_cast<std::size_t>(s)]
                                      : random_start(rng, q);
    ++result.starts_run;
    LmOutcome o = levenberg_marquardt(res, start, config.max_iters, config.tol);
    if (!std::isfinite(o.cost)) continue;
    const double scale = 1e-7 * std::max(1.0, std::abs(best.cost));
    if (!std::isfinite(best.cost) || o.cost < best.cost - scale) {
      best = std::move(o);
      hits = 1;
    } else {
      if (std::abs(o.cost - best.cost) <= scale) ++hits;
      if (o.cost < best.cost) best = std::move(o);
    }
    if (config.agree > 0 && hits >= config.agree) break;
  }

  if (!std::isfinite(best.cost)) {
    result.theta_hat = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
    result.status = FitStatus::InvalidDomain;
    return result;
  }
  result.theta_hat = res.full(best.z);
  result.logL_hat = log_likelihood(
      tree, std::span<const double>(result.theta_hat.data(), static_cast<std::size_t>(p)), data,
      config.eval);
  result.info = observed_information(tree, result.theta_hat, data, config.eval, {}, result.free);
  if (!information_ok(result.info)) {
    result.status = FitStatus::DegenerateInfo;
  } else {
    result.status = best.converged ? FitStatus::Ok : FitStatus::NoConvergence;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Generic maximization

namespace {

double penalized(const LogDensity& f, const Eigen::VectorXd& x) {
  const double v = f(x);
  return std::isfinite(v) ? -v : kPenalty;
}

Eigen::VectorXd central_gradient(const LogDensity& f, const Eigen::VectorXd& x) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * std::max(std::abs(x[i]), 1.0);
    Eigen::VectorXd a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (penalized(f, a) - penalized(f, b)) / (2.0 * h);
  }
  return g;
}

}  // namespace

MaximizeResult maximize(const LogDensity& f, const Eigen::VectorXd& start, int max_iters,
                        double tol) {
  const Eigen::Index n = start.size();
  MaximizeResult out;
  if (n == 0) {
    out.x = start;
    out.value = f(start);
    out.converged = std::isfinite(out.value);
    return out;
  }

  // Nelder-Mead on -f.
  std::vector<Eigen::VectorXd> simplex(static_cast<std::size_t>(n + 1), start);
  std::vector<double> fv(static_cast<std::size_t>(n + 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    simplex[static_cast<std::size_t>(i + 1)][i] += 0.1 * std::max(std::abs(start[i]), 1.0);
  }
  for (std::size_t i = 0; i < simplex.size(); ++i) fv[i] = penalized(f, simplex[i]);

  std::vector<std::size_t> idx(simplex.size());
  bool nm_done = false;
  for (int iter = 0; iter < max_iters && !nm_done; ++iter) {
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
    const std::size_t lo = idx.front(), hi = idx.back(), nh = idx[idx.size() - 2];
    if (std::abs(fv[hi] - fv[lo]) <= tol * (std::abs(fv[lo]) + tol)) {
      nm_done = true;
      break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < simplex.size(); ++i) {
      if (i != hi) centroid += simplex[i];
    }
    centroid /= static_cast<double>(n);
    const Eigen::VectorXd xr = centroid + (centroid - simplex[hi]);
    const double fr = penalized(f, xr);
    if (fr < fv[lo]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - simplex[hi]);
      const double fe = penalized(f, xe);
      if (fe < fr) {
        simplex[hi] = xe;
        fv[hi] = fe;
      } else {
        simplex[hi] = xr;
        fv[hi] = fr;
      }
    } else if (fr < fv[nh]) {
      simplex[hi] = xr;
      fv[hi] = fr;
    } else {
      const bool outside = fr < fv[hi];
      const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                         : Eigen::VectorXd(centroid + 0.5 * (simplex[hi] - centroid));
      const double fc = penalized(f, xc);
      if (fc < (outside ? fr : fv[hi])) {
        simplex[hi] = xc;
        fv[hi] = fc;
      } else {
        for (std::size_t i = 0; i < simplex.size(); ++i) {
          if (i == lo) continue;
          simplex[i] = simplex[lo] + 0.5 * (simplex[i] - simplex[lo]);
          fv[i] = penalized(f, simplex[i]);
        }
      }
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  Eigen::VectorXd x = simplex[best];
  double fx = fv[best];

  // BFGS polish.
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd g = central_gradient(f, x);
  bool converged = nm_done;
  for (int iter = 0; iter < max_iters; ++iter) {
    if (g.lpNorm<Eigen::Infinity>() <= 1e-8 * (1.0 + std::abs(fx))) {
      converged = true;
      break;
    }
    Eigen::VectorXd d = -H * g;
    if (d.dot(g) >= 0) {
      H.setIdentity();
      d = -g;
    }
    double t = 1.0;
    Eigen::VectorXd xn;
    double fn = fx;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
      xn = x + t * d;
      fn = penalized(f, xn);
      if (fn <= fx + 1e-4 * t * g.dot(d)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    const Eigen::VectorXd gn = central_gradient(f, xn);
    const Eigen::VectorXd s = xn - x, y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-300) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    const double drop = fx - fn;
    x = xn;
    g = gn;
    fx = fn;
    if (drop <= tol * (std::abs(fx) + tol)) {
      converged = true;
      break;
    }
  }
  out.x = x;
  out.value = f(x);
  out.converged = converged && std::isfinite(out.value);
  return out;
}

// ---------------------------------------------------------------------------
// Observed information

// Relative step of the first Richardson stage. Rounding error grows as 1/h^2
// and the extrapolated truncation error as h^4; 1e-3 balances the two for
// log-likelihoods of a few hundred nats.
constexpr double kHessianStep = 1e-3;

Eigen::MatrixXd negative_hessian(const LogDensity& f, const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd out(n, n);
  if (n == 0) return out;
  const double f0 = f(x);
  if (!std::isfinite(f0)) return Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::quiet_NaN());

  Eigen::VectorXd base(n);
  for (Eigen::Index i = 0; i < n; ++i) base[i] = kHessianStep * std::max(std::abs(x[i]), 1.0);

  auto at = [&](Eigen::Index i, double si, Eigen::Index j, double sj) {
    Eigen::VectorXd y = x;
    y[i] += si;
    if (j >= 0) y[j] += sj;
    return f(y);
  };
  // Second derivative estimates at step scale s; NaN if any value was not finite.
  auto estimate = [&](double s, Eigen::MatrixXd& d) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double hi = base[i] * s;
      d(i, i) = (at(i, hi, -1, 0) - 2.0 * f0 + at(i, -hi, -1, 0)) / (hi * hi);
      for (Eigen::Index j = 0; j < i; ++j) {
        const double hj = base[j] * s;
        d(i, j) = (at(i, hi, j, hj) - at(i, hi, j, -hj) - at(i, -hi, j, hj) + at(i, -hi, j, -hj)) /
                  (4.0 * hi * hj);
        d(j, i) = d(i, j);
      }
    }
    return d.allFinite();
  };

  Eigen::MatrixXd d1(n, n), d2(n, n);
  double s = 1.0;
  for (int attempt = 0; attempt < 6; ++attempt, s *= 0.1) {
    if (estimate(s, d1) && estimate(0.5 * s, d2)) {
      out = -(4.0 * d2 - d1) / 3.0;
      return 0.5 * (out + out.transpose());
    }
  }
  return Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
}

Eigen::MatrixXd observed_information(const ExprTree& tree, const Eigen::VectorXd& theta,
                                     const Dataset& data, EvalOptions eval,
                                     const LogDensity& log_prior, const std::vector<int>& free) {
  std::vector<int> idx = free;
  if (idx.empty() && free.empty()) {
    for (Eigen::Index i = 0; i < theta.size(); ++i) idx.push_back(static_cast<int>(i));
  }
  if (!theta.allFinite()) {
    const auto q = static_cast<Eigen::Index>(idx.size());
    return Eigen::MatrixXd::Constant(q, q, std::numeric_limits<double>::quiet_NaN());
  }
  Evaluator ev(tree, eval);
  std::vector<double> buf(theta.data(), theta.data() + theta.size());
  Eigen::VectorXd r;
  auto target = [&](const Eigen::VectorXd& z) {
    for (std::size_t i = 0; i < idx.size(); ++i) buf[static_cast<std::size_t>(idx[i])] = z[static_cast<Eigen::Index>(i)];
    const auto& pred = ev(buf, data.x());
    if (!pred.allFinite()) return -kInf;
    r = data.y() - pred.matrix();
    data.whiten(r);
    double v = -0.5 * r.squaredNorm() + data.log_normalization();
    if (log_prior) {
      v += log_prior(Eigen::Map<const Eigen::VectorXd>(buf.data(), static_cast<Eigen::Index>(buf.size())));
    }
    return v;
  };
  Eigen::VectorXd z(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) z[static_cast<Eigen::Index>(i)] = theta[idx[i]];
  return negative_hessian(target, z);
}

bool information_ok(const Eigen::MatrixXd& info) {
  return info.allFinite() && (info.size() == 0 || (info.diagonal().array() > 0.0).all());
}

// ---------------------------------------------------------------------------
// Parallelism

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                    : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto work = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace eqprior
