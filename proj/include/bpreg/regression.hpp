#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bpreg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Errors

/// Base class for failures of the regression model (as opposed to I/O).
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RankDeficientError : public ModelError {
 public:
  using ModelError::ModelError;
};

/// A linear predictor mapped outside (0, inf) under an identity or sqrt link.
class InvalidParameterError : public ModelError {
 public:
  InvalidParameterError(const std::string& what, std::size_t index)
      : ModelError(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

// ---------------------------------------------------------------------------
// Link functions

enum class LinkKind { log, identity, sqrt };

/// g maps a positive parameter to the linear predictor scale. The model only
/// ever needs the inverse g^{-1}(eta) and its first two derivatives.
class LinkFunction {
 public:
  explicit LinkFunction(LinkKind kind = LinkKind::log) : kind_(kind) {}

  static LinkFunction parse(std::string_view name);

  LinkKind kind() const { return kind_; }
  std::string_view name() const;

  double link(double value) const;
  double inverse(double eta) const;
  /// d g^{-1} / d eta.
  double inverse_deriv(double eta) const;
  /// d^2 g^{-1} / d eta^2.
  double inverse_deriv2(double eta) const;
  /// Whether g^{-1}(eta) is a valid (positive, invertible) parameter value.
  bool admissible(double eta) const;

  friend bool operator==(const LinkFunction&, const LinkFunction&) = default;

 private:
  LinkKind kind_;
};

// ---------------------------------------------------------------------------
// Model specification

/// Response, mean design X (n x p), precision design Z (n x q) and links.
/// Construction validates positivity of y, finite entries, full column rank
/// of both designs and p + q < n.
class ModelSpec {
 public:
  ModelSpec(VectorXd y, MatrixXd x, MatrixXd z, LinkFunction mean_link = LinkFunction(),
            LinkFunction precision_link = LinkFunction());

  const VectorXd& y() const { return y_; }
  const MatrixXd& x() const { return x_; }
  const MatrixXd& z() const { return z_; }
  const LinkFunction& mean_link() const { return mean_link_; }
  const LinkFunction& precision_link() const { return precision_link_; }

  Eigen::Index n() const { return y_.size(); }
  Eigen::Index p() const { return x_.cols(); }
  Eigen::Index q() const { return z_.cols(); }

  /// Copy with a different response vector (same designs and links).
  ModelSpec with_response(VectorXd y) const;

 private:
  VectorXd y_;
  MatrixXd x_;
  MatrixXd z_;
  LinkFunction mean_link_;
  LinkFunction precision_link_;
};

// ---------------------------------------------------------------------------
// Per-observation quantities shared by the score, Hessian, Fisher information
// and perturbation matrices.

struct ScoreWorkspace {
  VectorXd mu, phi;
  VectorXd a, b;          // d mu / d eta1, d phi / d eta2
  VectorXd a_prime_a;     // (d a / d mu) a = d^2 mu / d eta1^2
  VectorXd b_prime_b;     // d^2 phi / d eta2^2
  VectorXd y_star;        // log(y / (1 + y))
  VectorXd y_dagger;      // mu log y - (1 + mu) log(1 + y)
  VectorXd mu_star;       // psi(alpha) - psi(alpha + phi + 2)
  VectorXd gamma;         // psi(alpha + phi + 2) - psi(phi + 2)
  VectorXd mu_dagger;     // mu mu_star - gamma
  VectorXd d_mu, d_phi;   // d l_i / d mu_i, d l_i / d phi_i
  VectorXd dd_mu, dd_phi, dd_mu_phi;  // second partial derivatives of l_i
  VectorXd c, w, m;       // Hessian weights (diagonals of D3, D4, D5)
  VectorXd e3, e4, e5;    // expected-information weights
};

/// Evaluate every workspace quantity at (beta, nu). Throws
/// InvalidParameterError if a linear predictor leaves the link's domain.
ScoreWorkspace make_workspace(const ModelSpec& spec, const VectorXd& beta, const VectorXd& nu);

double log_likelihood(const ModelSpec& spec, const VectorXd& beta, const VectorXd& nu);

/// Per-observation log-likelihood terms l(mu_i, phi_i).
VectorXd log_likelihood_terms(const ModelSpec& spec, const VectorXd& beta, const VectorXd& nu);

/// (U_beta, U_nu) = (X^T Phi D1 (y* - mu*), Z^T D2 (y_dagger - mu_dagger)).
VectorXd score(const ModelSpec& spec, const VectorXd& beta, const VectorXd& nu);

/// Score assembled from an already-evaluated workspace.
VectorXd score_from_workspace(const MatrixXd& x, const MatrixXd& z, const ScoreWorkspace& ws);

/// (p+q) x n matrix whose column i is the gradient of l_i in (beta, nu).
MatrixXd score_contributions(const ModelSpec& spec, const VectorXd& beta, const VectorXd& nu);

MatrixXd hessian(const ModelSpec& spec, const VectorXd& beta, const VectorXd& nu);
MatrixXd hessian_from_workspace(const MatrixXd& x, const MatrixXd& z, const ScoreWorkspace& ws);

MatrixXd fisher_information(const ModelSpec& spec, const VectorXd& beta, const VectorXd& nu);
MatrixXd fisher_from_workspace(const MatrixXd& x, const MatrixXd& z, const ScoreWorkspace& ws);

// ---------------------------------------------------------------------------
// Fitting

enum class VcovSource { observed_hessian, fisher };

struct FitOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;
  double relative_loglik_tolerance = 1e-10;
  int max_step_halvings = 30;
  bool quasi_newton_fallback = true;
  VcovSource vcov_source = VcovSource::observed_hessian;
  std::optional<VectorXd> start_beta;
  std::optional<VectorXd> start_nu;
};

enum class FitPhase { fisher_scoring, newton, quasi_newton };

struct TraceEntry {
  int iteration = 0;
  FitPhase phase = FitPhase::fisher_scoring;
  double loglik = 0.0;
  double max_abs_score = 0.0;
  double step = 0.0;
};

using FitTrace = std::vector<TraceEntry>;

class ConvergenceError : public ModelError {
 public:
  ConvergenceError(const std::string& what, FitTrace trace)
      : ModelError(what), trace_(std::move(trace)) {}
  const FitTrace& trace() const { return trace_; }

 private:
  FitTrace trace_;
};

struct FittedModel {
  ModelSpec spec;
  VectorXd beta_hat;
  VectorXd nu_hat;
  double loglik = 0.0;
  MatrixXd hessian;
  MatrixXd fisher;
  MatrixXd vcov;
  VcovSource vcov_source = VcovSource::observed_hessian;
  bool converged = false;
  int iterations = 0;
  VectorXd mu_hat;
  VectorXd phi_hat;
  FitTrace trace;

  /// theta = (beta^T, nu^T)^T.
  VectorXd theta() const;
  VectorXd standard_errors() const;
  Eigen::Index num_parameters() const { return beta_hat.size() + nu_hat.size(); }
};

/// Moment-based starting values: OLS of g1(y + 0.01) on X for beta and a
/// constant precision from the residual variance for nu.
std::pair<VectorXd, VectorXd> starting_values(const ModelSpec& spec);

/// Maximum likelihood by Fisher scoring with step halving, falling back to
/// BFGS on -l when no halving improves the likelihood. Slowly converging
/// Fisher iterations are accelerated with observed-information steps.
FittedModel fit(const ModelSpec& spec, const FitOptions& options = {});

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

std::vector<Interval> confidence_intervals(const FittedModel& m, double level);

struct LrTestResult {
  double statistic = 0.0;  // 2 (l_unrestricted - l_restricted)
  int df = 0;
  double p_value = 1.0;
  /// The closed-form expansion over observations, evaluated with the
  /// unrestricted fit in the "hat" slot (the assignment that reproduces the
  /// statistic).
  double expanded_statistic = 0.0;
  /// The expansion with the two fits swapped; equals -statistic.
  double swapped_expansion = 0.0;
};

/// Likelihood ratio test of constant precision: `reduced` must share y, X and
/// links with `full`, and its Z must be the leading columns of full's Z.
LrTestResult lr_test_precision(const FittedModel& full, const FittedModel& reduced);

}  // namespace bpreg
