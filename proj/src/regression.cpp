#include "bpreg/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bpreg/special_functions.hpp"

namespace bpreg {

using special::digamma;
using special::log_gamma;
using special::trigamma;

// ---------------------------------------------------------------------------
// LinkFunction

LinkFunction LinkFunction::parse(std::string_view name) {
  if (name == "log") return LinkFunction(LinkKind::log);
  if (name == "identity") return LinkFunction(LinkKind::identity);
  if (name == "sqrt") return LinkFunction(LinkKind::sqrt);
  throw std::invalid_argument("unknown link function '" + std::string(name) +
                              "' (expected log, identity or sqrt)");
}

std::string_view LinkFunction::name() const {
  switch (kind_) {
    case LinkKind::log: return "log";
    case LinkKind::identity: return "identity";
    case LinkKind::sqrt: return "sqrt";
  }
  return "?";
}

double LinkFunction::link(double value) const {
  switch (kind_) {
    case LinkKind::log: return std::log(value);
    case LinkKind::identity: return value;
    case LinkKind::sqrt: return std::sqrt(value);
  }
  return value;
}

double LinkFunction::inverse(double eta) const {
  switch (kind_) {
    case LinkKind::log: return std::exp(eta);
    case LinkKind::identity: return eta;
    case LinkKind::sqrt: return eta * eta;
  }
  return eta;
}

double LinkFunction::inverse_deriv(double eta) const {
  switch (kind_) {
    case LinkKind::log: return std::exp(eta);
    case LinkKind::identity: return 1.0;
    case LinkKind::sqrt: return 2.0 * eta;
  }
  return 1.0;
}

double LinkFunction::inverse_deriv2(double eta) const {
  switch (kind_) {
    case LinkKind::log: return std::exp(eta);
    case LinkKind::identity: return 0.0;
    case LinkKind::sqrt: return 2.0;
  }
  return 0.0;
}

bool LinkFunction::admissible(double eta) const {
  if (!std::isfinite(eta)) return false;
  if (kind_ == LinkKind::log) {
    const double v = std::exp(eta);
    return v > 0.0 && std::isfinite(v);
  }
  // identity and sqrt are only monotone with a positive image for eta > 0.
  return eta > 0.0;
}

// ---------------------------------------------------------------------------
// ModelSpec

namespace {

Eigen::Index column_rank(const MatrixXd& m) {
  Eigen::ColPivHouseholderQR<MatrixXd> qr(m);
  qr.setThreshold(1e-10);
  return qr.rank();
}

}  // namespace

ModelSpec::ModelSpec(VectorXd y, MatrixXd x, MatrixXd z, LinkFunction mean_link,
                     LinkFunction precision_link)
    : y_(std::move(y)),
      x_(std::move(x)),
      z_(std::move(z)),
      mean_link_(mean_link),
      precision_link_(precision_link) {
  const Eigen::Index n = y_.size();
  if (x_.rows() != n || z_.rows() != n) {
    throw ModelError("design matrices must have one row per observation");
  }
  if (x_.cols() < 1 || z_.cols() < 1) throw ModelError("designs need at least one column");
  if (x_.cols() + z_.cols() >= n) {
    throw ModelError("need p + q < n (p=" + std::to_string(x_.cols()) + ", q=" +
                     std::to_string(z_.cols()) + ", n=" + std::to_string(n) + ")");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(y_(i)) || !(y_(i) > 0.0)) {
      throw ModelError("response must be positive; observation " + std::to_string(i) + " is " +
                       std::to_string(y_(i)));
    }
  }
  if (!x_.allFinite() || !z_.allFinite()) throw ModelError("design matrices contain non-finite values");
  if (column_rank(x_) < x_.cols()) throw RankDeficientError("mean design X is rank deficient");
  if (column_rank(z_) < z_.cols()) throw RankDeficientError("precision design Z is rank deficient");
}

ModelSpec ModelSpec::with_response(VectorXd y) const {
  return ModelSpec(std::move(y), x_, z_, mean_link_, precision_link_);
}

// ---------------------------------------------------------------------------
// Likelihood and derivatives

namespace {

struct LinearPredictors {
  VectorXd mu, phi, a, b, a2, b2;
};

LinearPredictors predictors(const ModelSpec& spec, const VectorXd& beta, const VectorXd& nu) {
  if (beta.size() != spec.p() || nu.size() != spec.q()) {
    throw std::invalid_argument("coefficient vector sizes do not match the designs");
  }
  const VectorXd eta1 = spec.x() * beta;
  const VectorXd eta2 = spec.z() * nu;
  const Eigen::Index n = spec.n();
  LinearPredictors lp{VectorXd(n), VectorXd(n), VectorXd(n), VectorXd(n), VectorXd(n), VectorXd(n)};
  const LinkFunction& g1 = spec.mean_link();
  const LinkFunction& g2 = spec.precision_link();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!g1.admissible(eta1(i))) {
      throw InvalidParameterError("mean predictor out of range at observation " + std::to_string(i),
                                  static_cast<std::size_t>(i));
    }
    if (!g2.admissible(eta2(i))) {
      throw InvalidParameterError(
          "precision predictor out of range at observation " + std::to_string(i),
          static_cast<std::size_t>(i));
    }
    lp.mu(i) = g1.inverse(eta1(i));
    lp.a(i) = g1.inverse_deriv(eta1(i));
    lp.a2(i) = g1.inverse_deriv2(eta1(i));
    lp.phi(i) = g2.inverse(eta2(i));
    lp.b(i) = g2.inverse_deriv(eta2(i));
    lp.b2(i) = g2.inverse_deriv2(eta2(i));
  }
  return lp;
}

}  // namespace

ScoreWorkspace make_workspace(const ModelSpec& spec, const VectorXd& beta, const VectorXd& nu) {
  LinearPredictors lp = predictors(spec, beta, nu);
  const Eigen::Index n = spec.n();
  ScoreWorkspace ws;
  ws.mu = std::move(lp.mu);
  ws.phi = std::move(lp.phi);
  ws.a = std::move(lp.a);
  ws.b = std::move(lp.b);
  ws.a_prime_a = std::move(lp.a2);
  ws.b_prime_b = std::move(lp.b2);
  for (VectorXd* v : {&ws.y_star, &ws.y_dagger, &ws.mu_star, &ws.gamma, &ws.mu_dagger, &ws.d_mu,
                      &ws.d_phi, &ws.dd_mu, &ws.dd_phi, &ws.dd_mu_phi, &ws.c, &ws.w, &ws.m, &ws.e3,
                      &ws.e4, &ws.e5}) {
    v->resize(n);
  }

  const VectorXd& y = spec.y();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = ws.mu(i);
    const double phi = ws.phi(i);
    const double alpha = mu * (1.0 + phi);
    const double total = alpha + phi + 2.0;
    const double psi_alpha = digamma(alpha);
    const double psi_total = digamma(total);
    const double psi_phi = digamma(phi + 2.0);
    const double tri_alpha = trigamma(alpha);
    const double tri_total = trigamma(total);
    const double tri_phi = trigamma(phi + 2.0);
    const double log_y = std::log(y(i));
    const double log1p_y = std::log1p(y(i));

    ws.y_star(i) = log_y - log1p_y;
    ws.y_dagger(i) = mu * log_y - (1.0 + mu) * log1p_y;
    ws.mu_star(i) = psi_alpha - psi_total;
    ws.gamma(i) = psi_total - psi_phi;
    ws.mu_dagger(i) = mu * ws.mu_star(i) - ws.gamma(i);
    ws.d_mu(i) = (1.0 + phi) * (ws.y_star(i) - ws.mu_star(i));
    ws.d_phi(i) = ws.y_dagger(i) - ws.mu_dagger(i);

    ws.dd_mu(i) = -(1.0 + phi) * (1.0 + phi) * (tri_alpha - tri_total);
    ws.dd_phi(i) = -mu * mu * tri_alpha + (1.0 + mu) * (1.0 + mu) * tri_total - tri_phi;
    ws.dd_mu_phi(i) = ws.y_star(i) + psi_total - psi_alpha + (1.0 + phi) * tri_total +
                      mu * (1.0 + phi) * (tri_total - tri_alpha);

    const double a = ws.a(i);
    const double b = ws.b(i);
    ws.c(i) = ws.dd_mu(i) * a * a + ws.d_mu(i) * ws.a_prime_a(i);
    ws.w(i) = ws.dd_phi(i) * b * b + ws.d_phi(i) * ws.b_prime_b(i);
    ws.m(i) = ws.dd_mu_phi(i) * a * b;

    ws.e3(i) = (1.0 + phi) * (1.0 + phi) * (tri_alpha - tri_total) * a * a;
    ws.e4(i) = (mu * mu * tri_alpha - (1.0 + mu) * (1.0 + mu) * tri_total + tri_phi) * b * b;
    ws.e5(i) = -(1.0 + phi) * (tri_total + mu * (tri_total - tri_alpha)) * a * b;
  }
  return ws;
}

VectorXd log_likelihood_terms(const ModelSpec& spec, const VectorXd& beta, const VectorXd& nu) {
  const LinearPredictors lp = predictors(spec, beta, nu);
  const Eigen::Index n = spec.n();
  VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = lp.mu(i);
    const double phi = lp.phi(i);
    const double alpha = mu * (1.0 + phi);
    const double y = spec.y()(i);
    out(i) = (alpha - 1.0) * std::log(y) - (alpha + phi + 2.0) * std::log1p(y) - log_gamma(alpha) -
             log_gamma(phi + 2.0) + log_gamma(alpha + phi + 2.0);
  }
  return out;
}

double log_likelihood(const ModelSpec& spec, const VectorXd& beta, const VectorXd& nu) {
  return log_likelihood_terms(spec, beta, nu).sum();
}

VectorXd score_from_workspace(const MatrixXd& x, const MatrixXd& z, const ScoreWorkspace& ws) {
  const Eigen::Index p = x.cols();
  const Eigen::Index q = z.cols();
  VectorXd u(p + q);
  const VectorXd mean_part =
      (1.0 + ws.phi.array()) * ws.a.array() * (ws.y_star - ws.mu_star).array();
  const VectorXd precision_part = ws.b.array() * (ws.y_dagger - ws.mu_dagger).array();
  u.head(p) = x.transpose() * mean_part;
  u.tail(q) = z.transpose() * precision_part;
  return u;
}

VectorXd score(const ModelSpec& spec, const VectorXd& beta, const VectorXd& nu) {
  return score_from_workspace(spec.x(), spec.z(), make_workspace(spec, beta, nu));
}

MatrixXd score_contributions(const ModelSpec& spec, const VectorXd& beta, const VectorXd& nu) {
  const ScoreWorkspace ws = make_workspace(spec, beta, nu);
  const Eigen::Index p = spec.p();
  const Eigen::Index q = spec.q();
  MatrixXd out(p + q, spec.n());
  out.topRows(p) = spec.x().transpose() * (ws.a.array() * ws.d_mu.array()).matrix().asDiagonal();
  out.bottomRows(q) = spec.z().transpose() * (ws.b.array() * ws.d_phi.array()).matrix().asDiagonal();
  return out;
}

namespace {

MatrixXd assemble_blocks(const MatrixXd& x, const MatrixXd& z, const VectorXd& mean_w,
                         const VectorXd& cross_w, const VectorXd& precision_w) {
  const Eigen::Index p = x.cols();
  const Eigen::Index q = z.cols();
  MatrixXd out(p + q, p + q);
  out.topLeftCorner(p, p) = x.transpose() * mean_w.asDiagonal() * x;
  out.topRightCorner(p, q) = x.transpose() * cross_w.asDiagonal() * z;
  out.bottomLeftCorner(q, p) = out.topRightCorner(p, q).transpose();
  out.bottomRightCorner(q, q) = z.transpose() * precision_w.asDiagonal() * z;
  // X^T D X is symmetric in exact arithmetic; remove rounding asymmetry.
  out = 0.5 * (out + out.transpose()).eval();
  return out;
}

}  // namespace

MatrixXd hessian_from_workspace(const MatrixXd& x, const MatrixXd& z, const ScoreWorkspace& ws) {
  return assemble_blocks(x, z, ws.c, ws.m, ws.w);
}

MatrixXd hessian(const ModelSpec& spec, const VectorXd& beta, const VectorXd& nu) {
  return hessian_from_workspace(spec.x(), spec.z(), make_workspace(spec, beta, nu));
}

MatrixXd fisher_from_workspace(const MatrixXd& x, const MatrixXd& z, const ScoreWorkspace& ws) {
  return assemble_blocks(x, z, ws.e3, ws.e5, ws.e4);
}

MatrixXd fisher_information(const ModelSpec& spec, const VectorXd& beta, const VectorXd& nu) {
  return fisher_from_workspace(spec.x(), spec.z(), make_workspace(spec, beta, nu));
}

// ---------------------------------------------------------------------------
// Fitting

VectorXd FittedModel::theta() const {
  VectorXd t(beta_hat.size() + nu_hat.size());
  t << beta_hat, nu_hat;
  return t;
}

VectorXd FittedModel::standard_errors() const { return vcov.diagonal().cwiseSqrt(); }

namespace {

bool all_admissible(const LinkFunction& g, const VectorXd& eta) {
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    if (!g.admissible(eta(i))) return false;
  }
  return true;
}

VectorXd least_squares(const MatrixXd& a, const VectorXd& rhs) {
  return a.colPivHouseholderQr().solve(rhs);
}

struct Objective {
  const ModelSpec& spec;
  Eigen::Index p;

  // Returns false if theta leaves the links' domains.
  bool evaluate(const VectorXd& theta, double& loglik, ScoreWorkspace* ws) const {
    const VectorXd beta = theta.head(p);
    const VectorXd nu = theta.tail(theta.size() - p);
    try {
      loglik = log_likelihood(spec, beta, nu);
      if (!std::isfinite(loglik)) return false;
      if (ws) *ws = make_workspace(spec, beta, nu);
    } catch (const InvalidParameterError&) {
      return false;
    }
    return true;
  }
};

double max_abs(const VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

double relative_change(double from, double to) {
  return std::abs(to - from) / std::max(1.0, std::abs(from));
}

// Rounding error in l. The log-gamma terms cancel, and with large phi_i
// they can exceed |l| by orders of magnitude.
double loglik_noise(const ModelSpec& spec, const ScoreWorkspace& ws, double loglik) {
  double mag = 0.0;
  for (Eigen::Index i = 0; i < spec.n(); ++i) {
    const double phi = ws.phi(i);
    const double alpha = ws.mu(i) * (1.0 + phi);
    const double y = spec.y()(i);
    mag += std::abs((alpha - 1.0) * std::log(y)) + std::abs((alpha + phi + 2.0) * std::log1p(y)) +
           std::abs(log_gamma(alpha)) + std::abs(log_gamma(phi + 2.0)) + std::abs(log_gamma(alpha + phi + 2.0));
  }
  const double eps = std::numeric_limits<double>::epsilon();
  return std::max(64.0 * eps * std::max(1.0, std::abs(loglik)) * std::sqrt(static_cast<double>(spec.n())),
                  16.0 * eps * mag);
}

// BFGS on -l with Armijo backtracking. Updates theta, loglik and ws in place
// and appends trace entries.
void quasi_newton(const Objective& obj, const FitOptions& opt, const MatrixXd& start_inverse,
                  VectorXd& theta, double& loglik, ScoreWorkspace& ws, FitTrace& trace,
                  int& iteration) {
  const MatrixXd& x = obj.spec.x();
  const MatrixXd& z = obj.spec.z();
  MatrixXd h_inv = start_inverse;
  VectorXd grad = -score_from_workspace(x, z, ws);
  const Eigen::Index k = theta.size();
  for (int it = 0; it < opt.max_iterations; ++it) {
    if (max_abs(grad) <= opt.gradient_tolerance) return;
    VectorXd dir = -h_inv * grad;
    double slope = grad.dot(dir);
    if (!(slope < 0.0)) {
      h_inv = MatrixXd::Identity(k, k);
      dir = -grad;
      slope = grad.dot(dir);
    }
    double step = 1.0;
    bool accepted = false;
    double cand_ll = 0.0;
    ScoreWorkspace cand_ws;
    VectorXd cand;
    for (int h = 0; h < 60; ++h) {
      cand = theta + step * dir;
      if (obj.evaluate(cand, cand_ll, &cand_ws) && -cand_ll <= -loglik + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) return;
    const VectorXd cand_grad = -score_from_workspace(x, z, cand_ws);
    const VectorXd s = cand - theta;
    const VectorXd yv = cand_grad - grad;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      const double rho = 1.0 / sy;
      const MatrixXd eye = MatrixXd::Identity(k, k);
      h_inv = (eye - rho * s * yv.transpose()) * h_inv * (eye - rho * yv * s.transpose()) +
              rho * s * s.transpose();
    }
    theta = cand;
    loglik = cand_ll;
    ws = std::move(cand_ws);
    grad = cand_grad;
    ++iteration;
    trace.push_back({iteration, FitPhase::quasi_newton, loglik, max_abs(grad), step});
  }
}

}  // namespace

std::pair<VectorXd, VectorXd> starting_values(const ModelSpec& spec) {
  const Eigen::Index n = spec.n();
  const LinkFunction& g1 = spec.mean_link();
  const LinkFunction& g2 = spec.precision_link();

  VectorXd target(n);
  for (Eigen::Index i = 0; i < n; ++i) target(i) = g1.link(spec.y()(i) + 0.01);
  VectorXd beta = least_squares(spec.x(), target);
  if (!all_admissible(g1, spec.x() * beta)) {
    beta = least_squares(spec.x(), VectorXd::Constant(n, g1.link(spec.y().mean() + 0.01)));
    if (!all_admissible(g1, spec.x() * beta)) {
      throw ModelError("could not find admissible starting values for the mean submodel");
    }
  }
  const VectorXd eta1 = spec.x() * beta;
  VectorXd mu(n);
  for (Eigen::Index i = 0; i < n; ++i) mu(i) = g1.inverse(eta1(i));

  const double dof = static_cast<double>(std::max<Eigen::Index>(n - spec.p(), 1));
  const double resid_var = (spec.y() - mu).squaredNorm() / dof;
  const double mean_v = (mu.array() * (1.0 + mu.array())).mean();
  double phi = resid_var > 0.0 ? mean_v / resid_var : 1e6;
  phi = std::clamp(phi, 0.1, 1e6);

  VectorXd nu = VectorXd::Zero(spec.q());
  nu(0) = g2.link(phi);
  if (!all_admissible(g2, spec.z() * nu)) {
    nu = least_squares(spec.z(), VectorXd::Constant(n, g2.link(phi)));
    if (!all_admissible(g2, spec.z() * nu)) {
      throw ModelError("could not find admissible starting values for the precision submodel");
    }
  }
  return {beta, nu};
}

FittedModel fit(const ModelSpec& spec, const FitOptions& opt) {
  if (opt.max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
  if (!(opt.gradient_tolerance > 0.0) || !(opt.relative_loglik_tolerance > 0.0)) {
    throw std::invalid_argument("tolerances must be positive");
  }
  const Eigen::Index p = spec.p();
  const Eigen::Index q = spec.q();

  auto [beta0, nu0] = starting_values(spec);
  if (opt.start_beta) beta0 = *opt.start_beta;
  if (opt.start_nu) nu0 = *opt.start_nu;
  if (beta0.size() != p || nu0.size() != q) {
    throw std::invalid_argument("starting values have the wrong dimension");
  }

  VectorXd theta(p + q);
  theta << beta0, nu0;
  const Objective obj{spec, p};
  double loglik = 0.0;
  ScoreWorkspace ws;
  if (!obj.evaluate(theta, loglik, &ws)) throw ModelError("starting values are outside the links' domains");

  FitTrace trace;
  int iteration = 0;
  // Whether the last change in l was below the relative tolerance or, when
  // the log-gamma terms are large, below the rounding noise of l.
  bool loglik_settled = false;
  double last_step = 0.0;
  bool converged = false;
  bool used_fallback = false;

  // Fisher scoring converges only linearly when expected and observed
  // information differ much (small n). After a run of slow iterations the
  // direction switches to Newton, and stays there while -H is positive
  // definite.
  int slow = 0;
  double prev_gmax = std::numeric_limits<double>::infinity();
  FitPhase phase = FitPhase::fisher_scoring;

  for (;;) {
    const VectorXd u = score_from_workspace(spec.x(), spec.z(), ws);
    const double gmax = max_abs(u);
    trace.push_back({iteration, phase, loglik, gmax, last_step});
    if (gmax <= opt.gradient_tolerance && loglik_settled) {
      converged = true;
      break;
    }
    if (iteration >= opt.max_iterations) break;
    slow = gmax > 0.5 * prev_gmax ? slow + 1 : 0;
    prev_gmax = gmax;

    const MatrixXd info = fisher_from_workspace(spec.x(), spec.z(), ws);
    Eigen::LLT<MatrixXd> llt(info);
    if (llt.info() != Eigen::Success) {
      if (iteration == 0) throw RankDeficientError("Fisher information is not positive definite");
      throw ConvergenceError("Fisher information lost positive definiteness; the likelihood may be unbounded",
                             std::move(trace));
    }
    VectorXd dir = llt.solve(u);
    const bool was_newton = phase == FitPhase::newton;
    phase = FitPhase::fisher_scoring;
    if (slow >= 5 || was_newton) {
      Eigen::LLT<MatrixXd> observed(-hessian_from_workspace(spec.x(), spec.z(), ws));
      if (observed.info() == Eigen::Success) {
        dir = observed.solve(u);
        phase = FitPhase::newton;
      }
    }
    const double noise = loglik_noise(spec, ws, loglik);

    double step = 1.0;
    bool accepted = false;
    double cand_ll = 0.0;
    ScoreWorkspace cand_ws;
    VectorXd cand;
    for (int h = 0; h <= opt.max_step_halvings; ++h) {
      cand = theta + step * dir;
      if (obj.evaluate(cand, cand_ll, &cand_ws)) {
        // Near the optimum the predicted gain falls below the rounding noise of
        // l; there a step that shrinks the score is accepted instead.
        if (cand_ll > loglik ||
            (cand_ll >= loglik - noise &&
             max_abs(score_from_workspace(spec.x(), spec.z(), cand_ws)) < gmax)) {
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }

    if (accepted) {
      loglik_settled = relative_change(loglik, cand_ll) <= opt.relative_loglik_tolerance ||
                       std::abs(cand_ll - loglik) <= noise;
      theta = cand;
      loglik = cand_ll;
      ws = std::move(cand_ws);
      last_step = step;
      ++iteration;
      continue;
    }

    // No halving improved the likelihood. At the optimum this is rounding noise.
    if (gmax <= opt.gradient_tolerance) {
      converged = true;
      break;
    }
    if (!opt.quasi_newton_fallback || used_fallback) break;
    used_fallback = true;
    const double before = loglik;
    quasi_newton(obj, opt, llt.solve(MatrixXd::Identity(p + q, p + q)), theta, loglik, ws, trace,
                 iteration);
    loglik_settled = relative_change(before, loglik) <= opt.relative_loglik_tolerance ||
                     std::abs(loglik - before) <= loglik_noise(spec, ws, loglik);
    last_step = 0.0;
  }

  if (!converged) {
    throw ConvergenceError("maximum likelihood iterations did not converge", std::move(trace));
  }

  const MatrixXd h = hessian_from_workspace(spec.x(), spec.z(), ws);
  const MatrixXd info = fisher_from_workspace(spec.x(), spec.z(), ws);
  Eigen::LLT<MatrixXd> llt(opt.vcov_source == VcovSource::observed_hessian ? MatrixXd(-h) : info);
  if (llt.info() != Eigen::Success) {
    throw ModelError("information matrix is not positive definite at the estimate");
  }
  MatrixXd vcov = llt.solve(MatrixXd::Identity(p + q, p + q));
  vcov = 0.5 * (vcov + vcov.transpose()).eval();
  FittedModel out{spec,  theta.head(p), theta.tail(q), loglik, h,     info,
                  vcov,  opt.vcov_source, true,          iteration, ws.mu, ws.phi,
                  std::move(trace)};
  return out;
}

std::vector<Interval> confidence_intervals(const FittedModel& m, double level) {
  if (!std::isfinite(level) || !(level > 0.0 && level < 1.0)) {
    throw special::DomainError("confidence level must lie in (0, 1)");
  }
  Eigen::LLT<MatrixXd> llt(m.vcov);
  if (llt.info() != Eigen::Success) throw ModelError("covariance matrix is not positive definite");
  const double zq = special::std_normal_quantile(1.0 - 0.5 * (1.0 - level));
  const VectorXd theta = m.theta();
  const VectorXd se = m.standard_errors();
  std::vector<Interval> out;
  out.reserve(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    out.push_back({theta(i) - zq * se(i), theta(i) + zq * se(i)});
  }
  return out;
}

namespace {

// 2 sum_i { [a_h - a_t] y*_i - (phi_h - phi_t) log(1 + y_i) - log G(a_h)/G(a_t)
//           - log G(phi_h + 2)/G(phi_t + 2) + log G(a_h + phi_h + 2)/G(a_t + phi_t + 2) }
double expanded_lr(const VectorXd& y, const VectorXd& mu_h, const VectorXd& phi_h,
                   const VectorXd& mu_t, const VectorXd& phi_t) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double a_h = mu_h(i) * (1.0 + phi_h(i));
    const double a_t = mu_t(i) * (1.0 + phi_t(i));
    const double y_star = std::log(y(i)) - std::log1p(y(i));
    sum += (a_h - a_t) * y_star - (phi_h(i) - phi_t(i)) * std::log1p(y(i)) -
           (log_gamma(a_h) - log_gamma(a_t)) - (log_gamma(phi_h(i) + 2.0) - log_gamma(phi_t(i) + 2.0)) +
           (log_gamma(a_h + phi_h(i) + 2.0) - log_gamma(a_t + phi_t(i) + 2.0));
  }
  return 2.0 * sum;
}

}  // namespace

LrTestResult lr_test_precision(const FittedModel& full, const FittedModel& reduced) {
  const ModelSpec& fs = full.spec;
  const ModelSpec& rs = reduced.spec;
  if (fs.n() != rs.n() || fs.y() != rs.y()) throw ModelError("LR test: models were fitted to different responses");
  if (fs.x() != rs.x()) throw ModelError("LR test: mean designs differ");
  if (!(fs.mean_link() == rs.mean_link()) || !(fs.precision_link() == rs.precision_link())) {
    throw ModelError("LR test: link functions differ");
  }
  if (rs.q() > fs.q() || fs.z().leftCols(rs.q()) != rs.z()) {
    throw ModelError("LR test: reduced precision design is not nested in the full one");
  }
  if (!full.converged || !reduced.converged) throw ModelError("LR test: both fits must have converged");

  LrTestResult out;
  out.df = static_cast<int>(fs.q() - rs.q());
  double stat = 2.0 * (full.loglik - reduced.loglik);
  if (stat < -1e-8) {
    throw ModelError("LR test: restricted fit has a larger likelihood than the unrestricted one");
  }
  stat = std::max(stat, 0.0);
  out.statistic = stat;
  out.expanded_statistic = expanded_lr(fs.y(), full.mu_hat, full.phi_hat, reduced.mu_hat, reduced.phi_hat);
  out.swapped_expansion = expanded_lr(fs.y(), reduced.mu_hat, reduced.phi_hat, full.mu_hat, full.phi_hat);
  out.p_value = out.df == 0 ? 1.0 : special::chi_squared_sf(stat, out.df);
  return out;
}

}  // namespace bpreg
