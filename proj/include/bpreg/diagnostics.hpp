#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "bpreg/regression.hpp"

namespace bpreg::diag {

// ---------------------------------------------------------------------------
// Residuals

enum class ResidualKind { quantile, pearson };

struct ResidualSet {
  ResidualKind kind = ResidualKind::quantile;
  VectorXd values;
  std::vector<std::size_t> observation_ids;  // 0-based row of each value
  /// Rows whose fitted cdf was clamped into [1e-12, 1 - 1e-12].
  std::vector<std::size_t> clamped;
};

inline constexpr double kCdfClamp = 1e-12;

/// Phi^{-1}(F(y_i | mu_i, phi_i)), the cdf clamped before inversion.
VectorXd quantile_residual_values(const VectorXd& y, const VectorXd& mu, const VectorXd& phi,
                                  std::vector<std::size_t>* clamped = nullptr);

/// sqrt(phi_i) (y_i - mu_i) / sqrt(mu_i (1 + mu_i)).
VectorXd pearson_residual_values(const VectorXd& y, const VectorXd& mu, const VectorXd& phi);

ResidualSet quantile_residuals(const FittedModel& m);
ResidualSet pearson_residuals(const FittedModel& m);

// ---------------------------------------------------------------------------
// Simulated envelope for sorted quantile residuals

struct EnvelopeOptions {
  int replicates = 100;
  double band_level = 0.95;
  std::uint64_t seed = 1;  // replicate r uses seed + r
  unsigned workers = 0;    // 0: hardware concurrency
  double max_failure_fraction = 0.2;
  FitOptions fit_options{};
};

struct EnvelopeBands {
  VectorXd sorted_residuals;
  VectorXd lower;
  VectorXd median;
  VectorXd upper;
  int replicates = 0;  // successful refits used for the bands
  int failed = 0;
  double band_level = 0.0;
};

EnvelopeBands simulated_envelope(const FittedModel& m, const EnvelopeOptions& options = {});

// ---------------------------------------------------------------------------
// Local influence

enum class SchemeKind { case_weights, response, mean_covariate, precision_covariate, simultaneous };

SchemeKind parse_scheme(std::string_view name);
std::string_view scheme_name(SchemeKind kind);

struct PerturbationScheme {
  SchemeKind kind = SchemeKind::case_weights;
  /// Column of X (mean_covariate, simultaneous) or of Z (precision_covariate).
  std::optional<Eigen::Index> covariate_index;
  /// Column of Z for the simultaneous scheme; located by matching X's column
  /// when absent.
  std::optional<Eigen::Index> precision_covariate_index;
  /// s_i for the mean covariate; defaults to the column's sample SD.
  std::optional<VectorXd> scale;
  /// s-dot_i for the precision covariate; defaults to the column's sample SD.
  std::optional<VectorXd> precision_scale;
};

/// The (p+q) x n matrix of mixed derivatives d^2 l(theta, omega) / d theta d omega_i
/// at (theta-hat, omega_0), beta rows first.
MatrixXd perturbation_matrix(const FittedModel& m, const PerturbationScheme& scheme);

enum class InfluenceSubset { theta, beta_only, nu_only };

InfluenceSubset parse_subset(std::string_view name);
std::string_view subset_name(InfluenceSubset s);

struct InfluenceResult {
  MatrixXd delta;
  MatrixXd curvature_matrix;  // B = Delta^T M Delta
  VectorXd c_indices;         // 2 |b_ii|
  double c_max = 0.0;
  VectorXd l_max;
  double threshold = 0.0;  // 2 mean(C_i)
  InfluenceSubset subset = InfluenceSubset::theta;

  std::vector<std::size_t> flagged() const;
};

InfluenceResult local_influence(const FittedModel& m, const MatrixXd& delta,
                                InfluenceSubset subset = InfluenceSubset::theta);

}  // namespace bpreg::diag
