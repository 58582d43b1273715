#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <numbers>
#include <numeric>

#include "bpreg/distribution.hpp"
#include "bpreg/regression.hpp"
#include "bpreg/simulation.hpp"
#include "bpreg/special_functions.hpp"
#include "doctest.h"
#include "model_fixtures.hpp"

using namespace bpreg;
using bpreg::testing::fd_gradient;
using bpreg::testing::fd_jacobian;
using bpreg::testing::random_instance;
using bpreg::testing::scaled_error;
using bpreg::testing::stack;

namespace {

struct ScenarioFit {
  sim::ScenarioDesign design;
  FittedModel model;
};

ScenarioFit scenario_fit(int n, std::uint64_t seed) {
  sim::ScenarioConfig cfg;
  cfg.n = n;
  const sim::ScenarioDesign d = sim::make_design(cfg);
  const VectorXd y = sim::simulate_response(d.mu, d.phi, seed);
  return {d, fit(ModelSpec(y, d.x, d.z))};
}

}  // namespace

TEST_CASE("link functions: inverse derivatives match finite differences") {
  for (auto kind : {LinkKind::log, LinkKind::identity, LinkKind::sqrt}) {
    const LinkFunction g(kind);
    for (double eta : {0.3, 1.1, 2.7}) {
      const double h = 1e-5;
      CHECK(std::abs((g.inverse(eta + h) - g.inverse(eta - h)) / (2 * h) - g.inverse_deriv(eta)) < 1e-8);
      CHECK(std::abs((g.inverse_deriv(eta + h) - g.inverse_deriv(eta - h)) / (2 * h) - g.inverse_deriv2(eta)) <
            1e-7);
      CHECK(std::abs(g.link(g.inverse(eta)) - eta) < 1e-14);
    }
  }
  CHECK(LinkFunction::parse("sqrt").kind() == LinkKind::sqrt);
  CHECK(LinkFunction::parse("log").name() == "log");
  CHECK_THROWS_AS(LinkFunction::parse("logit"), std::invalid_argument);
  CHECK_FALSE(LinkFunction(LinkKind::identity).admissible(-0.1));
  CHECK_FALSE(LinkFunction(LinkKind::sqrt).admissible(0.0));
  CHECK(LinkFunction(LinkKind::log).admissible(-30.0));
}

TEST_CASE("log-likelihood of a single unit-mean, unit-precision observation is ln 0.375") {
  // p + q < n forces at least three rows; every row carries the same term.
  const VectorXd y = VectorXd::Ones(3);
  const MatrixXd one = MatrixXd::Ones(3, 1);
  const ModelSpec spec(y, one, one);
  const VectorXd zero = VectorXd::Zero(1);
  const VectorXd terms = log_likelihood_terms(spec, zero, zero);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(std::abs(terms(i) - std::log(0.375)) < 1e-14);
  CHECK(std::abs(std::log(0.375) - (-0.9808292530117262)) < 1e-15);
  CHECK(std::abs(log_likelihood(spec, zero, zero) - 3 * std::log(0.375)) < 1e-13);
}

TEST_CASE("log-likelihood equals the sum of log densities") {
  const auto inst = random_instance(101, 20, 2, 2);
  const VectorXd mu = (inst.spec.x() * inst.beta).array().exp();
  const VectorXd phi = (inst.spec.z() * inst.nu).array().exp();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < 20; ++i) sum += log_pdf(inst.spec.y()(i), MeanPrecisionParams(mu(i), phi(i)));
  CHECK(std::abs(log_likelihood(inst.spec, inst.beta, inst.nu) - sum) < 1e-10);
}

TEST_CASE("model specification validation") {
  const auto inst = random_instance(5, 20, 2, 2);
  MatrixXd dup(20, 3);
  dup << inst.spec.x(), inst.spec.x().col(0);
  CHECK_THROWS_AS(ModelSpec(inst.spec.y(), dup, inst.spec.z()), RankDeficientError);
  CHECK_THROWS_AS(fit(ModelSpec(inst.spec.y(), dup, inst.spec.z())), RankDeficientError);

  VectorXd bad = inst.spec.y();
  bad(4) = 0.0;
  CHECK_THROWS_AS(ModelSpec(bad, inst.spec.x(), inst.spec.z()), ModelError);
  bad(4) = std::nan("");
  CHECK_THROWS_AS(ModelSpec(bad, inst.spec.x(), inst.spec.z()), ModelError);
  const MatrixXd wide = MatrixXd::Random(4, 2);
  CHECK_THROWS_AS(ModelSpec(VectorXd::Ones(4), wide, wide), ModelError);
  CHECK_THROWS_AS(ModelSpec(inst.spec.y(), inst.spec.x().topRows(10), inst.spec.z()), ModelError);
}

TEST_CASE("identity and sqrt links report the offending observation") {
  const auto inst = random_instance(8, 20, 2, 1);
  const ModelSpec spec(inst.spec.y(), inst.spec.x(), inst.spec.z(), LinkFunction(LinkKind::identity),
                       LinkFunction(LinkKind::sqrt));
  VectorXd beta(2);
  beta << 1.0, 0.0;
  VectorXd nu(1);
  nu << 2.0;
  CHECK_NOTHROW(log_likelihood(spec, beta, nu));
  // beta such that exactly the row with the smallest covariate goes negative.
  Eigen::Index arg = 0;
  spec.x().col(1).minCoeff(&arg);
  const double xmin = spec.x()(arg, 1);
  beta << -xmin - 0.01, 1.0;
  try {
    log_likelihood(spec, beta, nu);
    FAIL("expected InvalidParameterError");
  } catch (const InvalidParameterError& e) {
    CHECK(e.index() == static_cast<std::size_t>(arg));
  }
}

TEST_CASE("score and Hessian match finite differences on 20 random instances") {
  int count = 0;
  for (int n : {20, 50}) {
    for (int p = 1; p <= 3; ++p) {
      for (int q = 1; q <= 3; ++q) {
        if (count == 20) break;
        const auto inst = random_instance(1000 + count, n, p, q);
        const ModelSpec& spec = inst.spec;
        auto ll = [&](const VectorXd& t) { return log_likelihood(spec, t.head(p), t.tail(q)); };
        auto sc = [&](const VectorXd& t) { return score(spec, t.head(p), t.tail(q)); };
        const VectorXd theta = stack(inst.beta, inst.nu);
        const VectorXd u = score(spec, inst.beta, inst.nu);
        const MatrixXd h = hessian(spec, inst.beta, inst.nu);
        INFO("instance " << count << " n=" << n << " p=" << p << " q=" << q);
        CHECK(scaled_error(u, fd_gradient(ll, theta, 1e-6)) <= 1e-6);
        CHECK(scaled_error(h, fd_jacobian(sc, theta, 1e-6)) <= 1e-5);
        CHECK((h - h.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, h.cwiseAbs().maxCoeff()));
        ++count;
      }
    }
  }
  // 2 sizes x 9 shapes gives 18; two more at n = 50 with p = q = 3.
  for (; count < 20; ++count) {
    const auto inst = random_instance(1000 + count, 50, 3, 3);
    auto ll = [&](const VectorXd& t) { return log_likelihood(inst.spec, t.head(3), t.tail(3)); };
    CHECK(scaled_error(score(inst.spec, inst.beta, inst.nu), fd_gradient(ll, stack(inst.beta, inst.nu), 1e-6)) <=
          1e-6);
  }
  CHECK(count == 20);
}

TEST_CASE("derivatives under identity and sqrt links match finite differences") {
  const auto inst = random_instance(77, 40, 2, 2);
  const ModelSpec spec(inst.spec.y(), inst.spec.x(), inst.spec.z(), LinkFunction(LinkKind::sqrt),
                       LinkFunction(LinkKind::identity));
  VectorXd beta(2), nu(2);
  beta << 1.2, 0.1;
  nu << 6.0, 0.8;
  auto ll = [&](const VectorXd& t) { return log_likelihood(spec, t.head(2), t.tail(2)); };
  auto sc = [&](const VectorXd& t) { return score(spec, t.head(2), t.tail(2)); };
  const VectorXd theta = stack(beta, nu);
  CHECK(scaled_error(score(spec, beta, nu), fd_gradient(ll, theta, 1e-6)) <= 1e-6);
  CHECK(scaled_error(hessian(spec, beta, nu), fd_jacobian(sc, theta, 1e-6)) <= 1e-5);
}

TEST_CASE("score is zero when the residual vectors vanish") {
  const auto inst = random_instance(12, 30, 2, 2);
  ScoreWorkspace ws = make_workspace(inst.spec, inst.beta, inst.nu);
  ws.y_star = ws.mu_star;
  ws.y_dagger = ws.mu_dagger;
  CHECK(score_from_workspace(inst.spec.x(), inst.spec.z(), ws).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("score contributions sum to the score") {
  const auto inst = random_instance(13, 30, 2, 3);
  const MatrixXd c = score_contributions(inst.spec, inst.beta, inst.nu);
  CHECK(c.rows() == 5);
  CHECK(c.cols() == 30);
  CHECK(scaled_error(c.rowwise().sum(), score(inst.spec, inst.beta, inst.nu)) < 1e-13);
}

TEST_CASE("Fisher information: scalar case against direct evaluation") {
  // Three identical rows with x = z = 1 and log links: I = 3 * per-row 2x2.
  const double y = 0.8, mu = 1.5, phi = 3.0;
  const ModelSpec spec(VectorXd::Constant(3, y), MatrixXd::Ones(3, 1), MatrixXd::Ones(3, 1));
  VectorXd beta(1), nu(1);
  beta << std::log(mu);
  nu << std::log(phi);
  const MatrixXd info = fisher_information(spec, beta, nu);

  using boost::math::trigamma;
  const double alpha = mu * (1 + phi);
  const double t_a = trigamma(alpha), t_s = trigamma(alpha + phi + 2), t_p = trigamma(phi + 2);
  // a = mu and b = phi under log links.
  const double e3 = (1 + phi) * (1 + phi) * (t_a - t_s) * mu * mu;
  const double e4 = (mu * mu * t_a - (1 + mu) * (1 + mu) * t_s + t_p) * phi * phi;
  const double e5 = -(1 + phi) * (t_s + mu * (t_s - t_a)) * mu * phi;
  CHECK(std::abs(info(0, 0) - 3 * e3) < 1e-12 * std::abs(3 * e3));
  CHECK(std::abs(info(1, 1) - 3 * e4) < 1e-12 * std::abs(3 * e4));
  CHECK(std::abs(info(0, 1) - 3 * e5) < 1e-12 * std::abs(3 * e5));
  CHECK(info(0, 1) == info(1, 0));
}

TEST_CASE("Fisher information equals the expected negative Hessian (Monte Carlo, n = 100)") {
  sim::ScenarioConfig cfg;
  cfg.n = 100;
  const sim::ScenarioDesign d = sim::make_design(cfg);
  const ModelSpec base(sim::simulate_response(d.mu, d.phi, 1), d.x, d.z);
  const MatrixXd info = fisher_information(base, cfg.true_beta, cfg.true_nu);
  MatrixXd mean_neg_h = MatrixXd::Zero(4, 4);
  const int reps = 2000;
  for (int r = 0; r < reps; ++r) {
    const ModelSpec s = base.with_response(sim::simulate_response(d.mu, d.phi, 5000 + r));
    mean_neg_h -= hessian(s, cfg.true_beta, cfg.true_nu);
  }
  mean_neg_h /= reps;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      INFO("entry " << i << "," << j << " analytic " << info(i, j) << " mc " << mean_neg_h(i, j));
      CHECK(std::abs(mean_neg_h(i, j) - info(i, j)) <= 0.02 * std::abs(info(i, j)));
    }
  }
  // Mean and precision parameters are not orthogonal.
  CHECK(info.topRightCorner(2, 2).cwiseAbs().minCoeff() > 1e-3);
  Eigen::LLT<MatrixXd> llt(info);
  CHECK(llt.info() == Eigen::Success);
}

TEST_CASE("fit recovers the scenario coefficients at n = 150") {
  const auto [d, m] = scenario_fit(150, 424242);
  const VectorXd truth = (VectorXd(4) << 2.0, -1.6, 2.6, -2.0).finished();
  const VectorXd se = m.standard_errors();
  for (int j = 0; j < 4; ++j) {
    INFO("parameter " << j << " est " << m.theta()(j) << " se " << se(j));
    CHECK(std::abs(m.theta()(j) - truth(j)) <= 3 * se(j));
  }
  CHECK(m.converged);
  CHECK(score(m.spec, m.beta_hat, m.nu_hat).cwiseAbs().maxCoeff() <= 1e-6);

  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m.hessian);
  CHECK(eig.eigenvalues().maxCoeff() < 0.0);
  CHECK((m.hessian - m.hessian.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * m.hessian.cwiseAbs().maxCoeff());
  CHECK((m.vcov - m.vcov.transpose()).cwiseAbs().maxCoeff() == 0.0);

  // log links map exactly.
  const VectorXd eta = m.spec.x() * m.beta_hat;
  for (Eigen::Index i = 0; i < 150; ++i) CHECK(m.mu_hat(i) == std::exp(eta(i)));
  CHECK_FALSE(m.trace.empty());
  CHECK(m.trace.back().max_abs_score <= 1e-6);
}

TEST_CASE("fitted estimate is a local maximum") {
  const auto [d, m] = scenario_fit(150, 99);
  Rng rng(3);
  const VectorXd theta = m.theta();
  for (int k = 0; k < 100; ++k) {
    VectorXd eps(4);
    for (int j = 0; j < 4; ++j) eps(j) = rng.normal();
    eps *= 0.1 * rng.uniform() / eps.norm();
    const VectorXd t = theta + eps;
    CHECK(log_likelihood(m.spec, t.head(2), t.tail(2)) <= m.loglik);
  }
}

TEST_CASE("fit is deterministic and invariant to row order") {
  const auto [d, m] = scenario_fit(120, 2024);
  const FittedModel again = fit(m.spec);
  CHECK((again.theta().array() == m.theta().array()).all());
  CHECK(again.loglik == m.loglik);

  std::vector<int> perm(120);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(8);
  for (int i = 119; i > 0; --i) std::swap(perm[i], perm[static_cast<int>(rng.uniform() * (i + 1))]);
  VectorXd y(120);
  MatrixXd x(120, 2), z(120, 2);
  for (int i = 0; i < 120; ++i) {
    y(i) = m.spec.y()(perm[i]);
    x.row(i) = m.spec.x().row(perm[i]);
    z.row(i) = m.spec.z().row(perm[i]);
  }
  const FittedModel shuffled = fit(ModelSpec(y, x, z));
  CHECK((shuffled.theta() - m.theta()).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("intercept-only fit is consistent for (mu, phi) = (2, 5)") {
  const int n = 2000;
  const VectorXd y = sim::simulate_response(VectorXd::Constant(n, 2.0), VectorXd::Constant(n, 5.0), 31);
  const FittedModel m = fit(ModelSpec(y, MatrixXd::Ones(n, 1), MatrixXd::Ones(n, 1)));
  const VectorXd se = m.standard_errors();
  INFO("beta0 " << m.beta_hat(0) << " nu0 " << m.nu_hat(0));
  CHECK(std::abs(m.beta_hat(0) - std::log(2.0)) <= 3 * se(0));
  CHECK(std::abs(m.nu_hat(0) - std::log(5.0)) <= 3 * se(1));
}

TEST_CASE("fit with sqrt mean link and identity precision link") {
  sim::ScenarioConfig cfg;
  cfg.n = 300;
  const sim::ScenarioDesign d = sim::make_design(cfg);
  VectorXd mu = (1.0 + 0.8 * d.x.col(1).array()).square();
  VectorXd phi = 4.0 + 6.0 * d.z.col(1).array();
  const VectorXd y = sim::simulate_response(mu, phi, 17);
  const ModelSpec spec(y, d.x, d.z, LinkFunction(LinkKind::sqrt), LinkFunction(LinkKind::identity));
  const FittedModel m = fit(spec);
  const VectorXd se = m.standard_errors();
  const VectorXd truth = (VectorXd(4) << 1.0, 0.8, 4.0, 6.0).finished();
  for (int j = 0; j < 4; ++j) CHECK(std::abs(m.theta()(j) - truth(j)) <= 4 * se(j));
  CHECK(score(spec, m.beta_hat, m.nu_hat).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("Fisher covariance option and starting values") {
  const auto [d, m] = scenario_fit(150, 7);
  FitOptions opt;
  opt.vcov_source = VcovSource::fisher;
  const FittedModel mf = fit(m.spec, opt);
  MatrixXd inv = mf.fisher.inverse();
  CHECK(scaled_error(mf.vcov, inv) < 1e-10);
  CHECK(mf.vcov_source == VcovSource::fisher);

  const auto [b0, n0] = starting_values(m.spec);
  CHECK(b0.size() == 2);
  CHECK(n0(1) == 0.0);
  CHECK(std::exp(n0(0)) >= 0.1);
}

TEST_CASE("non-convergence carries the iteration trace") {
  const auto [d, m] = scenario_fit(150, 11);
  FitOptions opt;
  opt.max_iterations = 1;
  opt.quasi_newton_fallback = false;
  try {
    fit(m.spec, opt);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.trace().size() == 2);
    CHECK(e.trace().back().loglik >= e.trace().front().loglik);
  }
}

TEST_CASE("quasi-Newton fallback from a poor start") {
  const auto [d, m] = scenario_fit(150, 13);
  FitOptions opt;
  opt.max_step_halvings = 0;  // forces the fallback as soon as a full step overshoots
  opt.start_beta = (VectorXd(2) << 4.0, 0.0).finished();
  opt.start_nu = (VectorXd(2) << 0.0, 0.0).finished();
  const FittedModel f = fit(m.spec, opt);
  CHECK((f.theta() - m.theta()).cwiseAbs().maxCoeff() < 1e-5);
  CHECK(score(f.spec, f.beta_hat, f.nu_hat).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("small samples with very large fitted precisions") {
  sim::ScenarioConfig cfg;
  cfg.n = 10;
  const sim::ScenarioDesign d = sim::make_design(cfg);

  // Replication 4 has phi_i up to about 4e3, so the log-gamma terms are near
  // 1e5 and l is only known to about 1e-10 at the optimum.
  const ModelSpec spec(sim::simulate_response(d.mu, d.phi, sim::replication_seed(1, 4)), d.x, d.z);
  const FittedModel f = fit(spec);
  CHECK(f.converged);
  CHECK(f.phi_hat.maxCoeff() > 1e3);
  CHECK(score(spec, f.beta_hat, f.nu_hat).cwiseAbs().maxCoeff() <= 1e-6);
  Eigen::LLT<MatrixXd> llt(-f.hessian);
  CHECK(llt.info() == Eigen::Success);

  // Replication 281 has no maximum: l grows without bound along a path where
  // some phi_i diverge. That must surface as a convergence failure.
  const ModelSpec unbounded(sim::simulate_response(d.mu, d.phi, sim::replication_seed(1, 281)), d.x, d.z);
  try {
    fit(unbounded);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    REQUIRE(!e.trace().empty());
    CHECK(e.trace().back().loglik > 100.0);
  }
}

TEST_CASE("confidence intervals") {
  const auto [d, m] = scenario_fit(150, 21);
  const auto ci95 = confidence_intervals(m, 0.95);
  const auto ci99 = confidence_intervals(m, 0.99);
  const VectorXd se = m.standard_errors();
  const double z95 = 1.959963984540054;
  const double z99 = special::std_normal_quantile(0.995);
  for (int j = 0; j < 4; ++j) {
    CHECK(std::abs((ci95[j].upper - ci95[j].lower) - 2 * z95 * se(j)) <= 1e-12 * se(j) * 4);
    CHECK(std::abs((ci99[j].upper - ci99[j].lower) / (ci95[j].upper - ci95[j].lower) - z99 / z95) < 1e-12);
    CHECK(std::abs(0.5 * (ci95[j].upper + ci95[j].lower) - m.theta()(j)) < 1e-12);
  }
  CHECK_THROWS_AS(confidence_intervals(m, 1.0), special::DomainError);
  CHECK_THROWS_AS(confidence_intervals(m, 0.0), special::DomainError);
}

TEST_CASE("LR test for varying precision") {
  const auto [d, full] = scenario_fit(150, 41);
  const ModelSpec reduced_spec(full.spec.y(), full.spec.x(), full.spec.z().leftCols(1));
  const FittedModel reduced = fit(reduced_spec);
  const LrTestResult lr = lr_test_precision(full, reduced);
  CHECK(lr.df == 1);
  CHECK(lr.statistic > 10.0);  // nu1 = -2 is far from zero
  CHECK(lr.statistic == doctest::Approx(2 * (full.loglik - reduced.loglik)));
  CHECK(std::abs(lr.expanded_statistic - lr.statistic) <= 1e-8);
  CHECK(std::abs(lr.swapped_expansion + lr.statistic) <= 1e-8);
  CHECK(std::abs(lr.p_value - special::chi_squared_sf(lr.statistic, 1)) < 1e-15);

  const LrTestResult same = lr_test_precision(reduced, reduced);
  CHECK(same.statistic == 0.0);
  CHECK(same.df == 0);
  CHECK(same.p_value == 1.0);

  const ModelSpec other(full.spec.y(), MatrixXd::Ones(150, 1), full.spec.z());
  CHECK_THROWS_AS(lr_test_precision(fit(other), reduced), ModelError);
  CHECK_THROWS_AS(lr_test_precision(reduced, full), ModelError);
}

TEST_CASE("LR statistic is roughly chi-squared(1) under constant precision") {
  sim::ScenarioConfig cfg;
  cfg.n = 100;
  const sim::ScenarioDesign d = sim::make_design(cfg);
  const VectorXd phi = VectorXd::Constant(100, std::exp(2.6));
  double sum = 0.0;
  const int reps = 300;
  for (int r = 0; r < reps; ++r) {
    const VectorXd y = sim::simulate_response(d.mu, phi, 900 + r);
    const FittedModel full = fit(ModelSpec(y, d.x, d.z));
    const FittedModel reduced = fit(ModelSpec(y, d.x, d.z.leftCols(1)));
    sum += lr_test_precision(full, reduced).statistic;
  }
  // chi2_1 has variance 2: the mean of 300 draws has SE 0.082.
  CHECK(std::abs(sum / reps - 1.0) < 0.3);
}
