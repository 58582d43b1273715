#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bpreg/regression.hpp"

namespace bpreg::sim {

/// Monte Carlo setup for the log-link model
///   log mu_i = beta_0 + beta_1 x_i,  log phi_i = nu_0 + nu_1 z_i,
/// with x_i, z_i ~ U(0, 1) drawn once from covariate_seed and then held fixed.
struct ScenarioConfig {
  int n = 150;
  int replications = 500;
  VectorXd true_beta = (VectorXd(2) << 2.0, -1.6).finished();
  VectorXd true_nu = (VectorXd(2) << 2.6, -2.0).finished();
  std::uint64_t seed = 1;
  std::uint64_t covariate_seed = 20170614;
  unsigned workers = 0;  // 0: hardware concurrency
  FitOptions fit_options{};

  void validate() const;
};

struct ScenarioDesign {
  MatrixXd x;  // [1, x_i]
  MatrixXd z;  // [1, z_i]
  VectorXd mu;
  VectorXd phi;
};

/// Covariates and true (mu_i, phi_i) for a config; independent of cfg.seed.
ScenarioDesign make_design(const ScenarioConfig& cfg);

/// One response vector y_i ~ BP(mu_i, phi_i) from its own generator.
VectorXd simulate_response(const VectorXd& mu, const VectorXd& phi, std::uint64_t seed);

inline std::uint64_t replication_seed(std::uint64_t base, int r) {
  return base + static_cast<std::uint64_t>(r);
}

struct ParameterSummary {
  std::string name;
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  double rmse = 0.0;
  double sd = 0.0;       // empirical, divisor R (so rmse^2 = bias^2 + sd^2)
  double mean_se = 0.0;  // average asymptotic standard error
  std::vector<double> coverage;  // one per ScenarioReport::levels
};

struct ScenarioReport {
  int n = 0;
  int replications = 0;
  int failed_fits = 0;
  std::uint64_t seed = 0;
  std::uint64_t covariate_seed = 0;
  std::vector<double> levels{0.90, 0.95, 0.99};
  std::vector<ParameterSummary> parameters;
};

/// Estimator quality and interval coverage over replications.
/// Throws ModelError if more than 5% of the fits fail.
ScenarioReport run_scenario_one(const ScenarioConfig& cfg);

struct PooledMoments {
  double mean = 0.0;
  double sd = 0.0;  // divisor N - 1
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  std::size_t count = 0;
};

PooledMoments pooled_moments(const std::vector<double>& xs);

/// Residual distributions at the fitted models.
struct ResidualReport {
  int n = 0;
  int replications = 0;
  int failed_fits = 0;
  std::uint64_t seed = 0;
  std::uint64_t covariate_seed = 0;
  PooledMoments quantile;
  PooledMoments pearson;
  /// Per successful replication (ascending replication index): sorted
  /// residuals, each of length n.
  std::vector<int> replication_index;
  std::vector<std::vector<double>> sorted_quantile;
  std::vector<std::vector<double>> sorted_pearson;
  /// Standard normal quantiles at (i - 0.375) / (n + 0.25), i = 1..n.
  std::vector<double> normal_scores;
};

ResidualReport run_scenario_two(const ScenarioConfig& cfg);

}  // namespace bpreg::sim
