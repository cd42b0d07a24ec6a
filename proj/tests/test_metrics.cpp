#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <vector>

#include "eqprior/errors.hpp"
#include "eqprior/metrics.hpp"
#include "eqprior/ngram.hpp"
#include "support.hpp"

using namespace eqprior;
using testing::tree;

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

Dataset line_data(int n, double sigma, std::uint64_t seed, bool twice = false) {
  Rng rng(seed);
  const int rows = twice ? 2 * n : n;
  Eigen::MatrixXd x(rows, 1);
  Eigen::VectorXd y(rows);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.uniform(0.5, 4.0);
    y(i) = 1.3 + 0.8 * x(i, 0) + sigma * rng.normal();
  }
  if (twice) {
    x.bottomRows(n) = x.topRows(n);
    y.tail(n) = y.head(n);
  }
  return Dataset::iid(x, y, sigma);
}

FitResult fake_fit(double logL, Eigen::MatrixXd info, Eigen::VectorXd theta) {
  FitResult f;
  f.logL_hat = logL;
  f.info = std::move(info);
  f.theta_hat = std::move(theta);
  for (int i = 0; i < f.theta_hat.size(); ++i) f.free.push_back(i);
  f.status = FitStatus::Ok;
  return f;
}

double sum_parts(const MetricValue& v) {
  double s = 0.0;
  for (const auto& p : v.parts) s += p.value;
  return s;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("fractional evidence arithmetic") {
  CHECK(fbf_log_evidence(-50.0, 2, 0.1) == doctest::Approx(-45.0 + std::log(0.1)).epsilon(1e-15));
  CHECK(std::abs(fbf_log_evidence(-50.0, 2, 0.1) - -47.302585) < 1e-6);
  CHECK(fbf_log_evidence(-50.0, 0, 0.3) == doctest::Approx(0.7 * -50.0));
  CHECK(fbf_log_evidence(-50.0, 2, 1.0) == 0.0);
  CHECK_THROWS_AS(fbf_log_evidence(-50.0, 2, 0.0), ConfigError);
  const auto f = fake_fit(-50.0, Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Ones(2));
  CHECK_FALSE(bayes_fbf(tree("a0+a1*x"), f, -3.0, 1.0).valid);
}

TEST_CASE("Laplace evidence") {
  CHECK(laplace_log_evidence(-12.5, Eigen::MatrixXd(0, 0)) == -12.5);
  Eigen::MatrixXd i1(1, 1);
  i1 << 4.0;
  CHECK(laplace_log_evidence(-1.0, i1) == doctest::Approx(-1.0 + 0.5 * kLog2Pi - 0.5 * std::log(4.0)));
  // A uniform prior one tenth as dense lowers the evidence by log 10.
  const double wide = laplace_log_evidence(-1.0 + std::log(1.0 / 100.0), i1);
  const double narrow = laplace_log_evidence(-1.0 + std::log(1.0 / 10.0), i1);
  CHECK(narrow - wide == doctest::Approx(std::log(10.0)));
  Eigen::MatrixXd bad(1, 1);
  bad << -1.0;
  CHECK_THROWS_AS(laplace_log_evidence(0.0, bad), NumericalError);
}

TEST_CASE("Laplace evidence of a conjugate Gaussian mean") {
  const double sigma = 0.8, mu0 = 0.5, tau = 2.0;
  Rng rng(21);
  const int n = 30;
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y(i) = 1.2 + sigma * rng.normal();

  // y ~ N(mu0 1, sigma^2 I + tau^2 1 1').
  const Eigen::MatrixXd cov = sigma * sigma * Eigen::MatrixXd::Identity(n, n) +
                              tau * tau * Eigen::MatrixXd::Ones(n, n);
  const Eigen::VectorXd r = y.array() - mu0;
  const double closed = -0.5 * r.dot(cov.ldlt().solve(r)) - 0.5 * n * kLog2Pi - 0.5 * log_det_spd(cov);

  const double post_prec = n / (sigma * sigma) + 1.0 / (tau * tau);
  const double mean = (y.sum() / (sigma * sigma) + mu0 / (tau * tau)) / post_prec;
  const auto data = Dataset::iid(Eigen::MatrixXd::Zero(n, 1), y, sigma);
  const std::vector<double> th{mean};
  const double log_h = log_likelihood(tree("a"), th, data) - 0.5 * std::log(2 * std::numbers::pi * tau * tau) -
                       0.5 * (mean - mu0) * (mean - mu0) / (tau * tau);
  Eigen::MatrixXd info(1, 1);
  info << post_prec;
  CHECK(std::abs(laplace_log_evidence(log_h, info) - closed) < 1e-8);
}

TEST_CASE("lattice constants") {
  CHECK(log_nu(1) == doctest::Approx(-0.0986122887).epsilon(1e-9));
  CHECK(log_nu(3) == log_nu(1));
  CHECK(log_nu(1, Lattice::Optimal) == doctest::Approx(log_nu(1)).epsilon(1e-14));
  CHECK(log_nu(5, Lattice::Optimal) < log_nu(5));
}

TEST_CASE("ESR description length term by term") {
  const auto d = line_data(50, 0.2, 1);
  const auto t0 = tree("sqrt(x)");
  const auto f0 = fit_params(t0, d, {});
  const auto v0 = description_length_esr(t0, f0, &d);
  CHECK(v0.value == doctest::Approx(-f0.logL_hat + 2.0 * std::log(2.0)).epsilon(1e-12));

  const auto ta = tree("a");
  const auto fa = fit_params(ta, d, {});
  const auto va = description_length_esr(ta, fa, &d);
  CHECK(va.part("structure") == 0.0);
  const double expect = -fa.logL_hat + 0.5 * std::log(fa.info(0, 0)) - 0.5 * std::log(3.0) +
                        std::log(std::abs(fa.theta_hat(0)));
  CHECK(va.value == doctest::Approx(expect).epsilon(1e-12));

  const auto tc = tree("3*x + a");
  const auto vc = description_length_esr(tc, fit_params(tc, d, {}), &d);
  CHECK(vc.part("structure") == doctest::Approx(5.0 * std::log(5.0) + std::log(3.0)));
}

TEST_CASE("tiny parameters are zeroed and refit") {
  Eigen::MatrixXd x(20, 1);
  Eigen::VectorXd y(20);
  for (int i = 0; i < 20; ++i) {
    x(i, 0) = 0.25 * (i + 1);
    y(i) = 2.0 * x(i, 0);
  }
  const auto d = Dataset::iid(x, y, 0.5);
  const auto t = tree("a0*x + a1");
  const auto v = description_length_esr(t, fit_params(t, d, {}), &d);
  CHECK(v.valid);
  CHECK(v.note == "zeroed a1");
  CHECK(v.value == doctest::Approx(sum_parts(v)).epsilon(1e-12));
  const auto kept = description_length_esr(t, fit_params(t, d, {}), &d, {}, std::nullopt,
                                           MetricOptions{.fbf = {}, .lattice = Lattice::Rectangular, .fbf_keep_nu = true, .zero_tiny_params = false});
  CHECK(kept.note.empty());
}

TEST_CASE("lattice description length") {
  const auto d = line_data(40, 0.2, 3);
  const auto t = tree("x*x");
  const auto f = fit_params(t, d, {});
  const auto v = description_length_lattice(t, f, -4.0, log_nu(0));
  CHECK(v.value == doctest::Approx(-f.logL_hat + 4.0).epsilon(1e-12));
  const auto t2 = tree("2*x");
  const auto v2 = description_length_lattice(t2, fit_params(t2, d, {}), -4.0, log_nu(0));
  CHECK(v2.part("structure") == doctest::Approx(4.0 + std::log(2.0)));
}

TEST_CASE("FBF description length against evidence and against the assembled form") {
  const auto d = line_data(60, 0.3, 4);
  const double b = 0.1;
  for (const char* text : {"a0 + a1*x", "a0*pow(x, a1)", "3*x + a"}) {
    const auto t = tree(text);
    const auto f = fit_params(t, d, {});
    const int p = static_cast<int>(f.free.size());
    const double lp = -7.5;
    const double nu = log_nu(p);
    const auto closed = fbf_description_length(t, f, lp, b, nu);
    const double gap = closed.value - (-fbf_log_evidence(f.logL_hat, p, b) - lp);
    CHECK(gap == doctest::Approx(0.5 * p * (kLog2Pi + nu) + log_constants(t)).epsilon(1e-12));
    const auto assembled = description_length_lattice(t, f, lp, nu, fbf_log_param_prior(f.logL_hat, f.info, b));
    CHECK(std::abs(assembled.value - closed.value) < 1e-8);
    CHECK(closed.value == doctest::Approx(sum_parts(closed)).epsilon(1e-12));
  }
}

TEST_CASE("Bayes FBF composition") {
  const auto f = fake_fit(-20.0, Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Ones(2));
  const auto v = bayes_fbf(tree("a0+a1*x"), f, -6.0, 0.25);
  CHECK(v.value == doctest::Approx(-fbf_log_evidence(-20.0, 2, 0.25) + 6.0).epsilon(1e-14));
  const auto f0 = fake_fit(-20.0, Eigen::MatrixXd(0, 0), Eigen::VectorXd(0));
  CHECK(fbf_description_length(tree("x"), f0, -6.0, 0.25, log_nu(0)).value == doctest::Approx(bayes_fbf(tree("x"), f0, -6.0, 0.25).value));
}

TEST_CASE("Pareto scores") {
  const auto s = pareto_score({{1, -100.0}, {3, -40.0}, {5, -39.0}});
  CHECK_FALSE(s[0].has_value());
  CHECK(*s[1] == doctest::Approx(30.0));
  CHECK(*s[2] == doctest::Approx(0.5));
  CHECK_FALSE(pareto_score({{2, -3.0}})[0].has_value());
  const auto off = pareto_score({{1, -10.0}, {2, -12.0}, {2, -5.0}, {3, -1.0}});
  CHECK_FALSE(off[1].has_value());
  CHECK(*off[2] == doctest::Approx(5.0));
  CHECK(*off[3] == doctest::Approx(4.0));
}

TEST_CASE("method names") {
  CHECK(parse_methods("mdl,bayes-fbf-lm") == std::vector<Method>{Method::Mdl, Method::BayesFbfLm});
  CHECK(parse_methods("all").size() == 6);
  CHECK_THROWS_AS(parse_methods("aic"), ConfigError);
}

TEST_CASE("ranking") {
  const auto d = line_data(80, 0.2, 5);
  std::vector<Candidate> cands;
  for (const char* text : {"a+a*x", "a*x+a", "x", "a*x", "sqrt(x)", "a + x*x"}) {
    Candidate c;
    c.tree = tree(text);
    c.fit = fit_params(c.tree, d, {});
    c.canonical = c.tree.canonical();
    cands.push_back(std::move(c));
  }
  const auto model = NGramModel::train(testing::corpus_trees(), 2);
  RankConfig cfg;
  const auto rk = rank(cands, &model, d, cfg);
  REQUIRE(rk.size() == 6);
  for (const auto& r : rk) {
    std::set<std::string> fam;
    for (std::size_t i = 0; i < r.ranked.size(); ++i) {
      CHECK(fam.insert(cands[r.ranked[i].index].canonical).second);
      CHECK(r.ranked[i].delta == doctest::Approx(r.ranked[i].metric.value - r.ranked[0].metric.value));
      if (i > 0) CHECK(r.ranked[i].metric.value >= r.ranked[i - 1].metric.value);
      if (r.method != Method::Score) {
        CHECK(r.ranked[i].metric.value == doctest::Approx(sum_parts(r.ranked[i].metric)).epsilon(1e-9));
      }
    }
    if (r.method == Method::Likelihood) CHECK(r.ranked.size() == 5);
  }
  // The generating line wins under the description-length methods.
  for (std::size_t m = 2; m < rk.size(); ++m) CHECK(cands[rk[m].ranked[0].index].canonical == "+(*(a,x),a)");
  CHECK_THROWS_AS(rank(cands, nullptr, d, cfg), ConfigError);
}

TEST_CASE("zero-prior candidates are invalid for the prior methods only") {
  // LEFT [+] has the single target x, so sin under + gets no mass.
  const std::vector<std::string> extra{"sin", "*", "a"};
  const auto model = NGramModel::train(std::vector<ExprTree>{tree("x+x")}, 2, 0, extra);
  const auto d = line_data(30, 0.2, 7);
  std::vector<Candidate> cands(1);
  cands[0].tree = tree("sin(a*x)+x");
  cands[0].fit = fit_params(cands[0].tree, d, {});
  cands[0].canonical = cands[0].tree.canonical();
  REQUIRE(log_prior(model, cands[0].tree) == -std::numeric_limits<double>::infinity());
  RankConfig cfg;
  const auto values = compute_metrics(cands, &model, d, cfg);
  for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
    const bool lm = cfg.methods[m] == Method::MdlLm || cfg.methods[m] == Method::MdlFbfLm ||
                    cfg.methods[m] == Method::BayesFbfLm;
    if (lm) {
      CHECK_FALSE(values[m][0].valid);
      CHECK(values[m][0].reason == "zero function prior");
    } else if (cfg.methods[m] != Method::Score) {
      CHECK(values[m][0].valid);
    }
  }
}

TEST_CASE("ties go to the simpler function") {
  std::vector<Candidate> cands(2);
  cands[0].tree = tree("sqrt(sqrt(x))");
  cands[1].tree = tree("x");
  for (auto& c : cands) c.canonical = c.tree.canonical();
  std::vector<std::vector<MetricValue>> values(1, std::vector<MetricValue>(2));
  values[0][0].value = values[0][1].value = 1.0;
  const auto r = rank(cands, values, {Method::Likelihood});
  CHECK(r[0].ranked[0].index == 1);
}

TEST_CASE("duplicating data doubles the accuracy term only") {
  const auto d1 = line_data(40, 0.2, 6);
  const auto d2 = line_data(40, 0.2, 6, true);
  const auto t = tree("a0 + a1*x");
  const auto f1 = fit_params(t, d1, {});
  const auto f2 = fit_params(t, d2, {});
  const auto v1 = description_length_esr(t, f1, &d1);
  const auto v2 = description_length_esr(t, f2, &d2);
  CHECK(v2.part("accuracy") == doctest::Approx(2.0 * v1.part("accuracy")).epsilon(1e-8));
  CHECK(v2.part("structure") == v1.part("structure"));
  const double b1 = FbfConfig{}.fraction(d1.size()), b2 = FbfConfig{}.fraction(d2.size());
  const auto g1 = fbf_description_length(t, f1, -5.0, b1, log_nu(2));
  const auto g2 = fbf_description_length(t, f2, -5.0, b2, log_nu(2));
  CHECK(std::abs(g2.part("accuracy")) > std::abs(g1.part("accuracy")));
  CHECK(g2.part("structure") == g1.part("structure"));
}

}  // TEST_SUITE
