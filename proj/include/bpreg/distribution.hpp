#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "bpreg/random.hpp"

namespace bpreg {

/// Classical (alpha, beta) shape parameterization of the beta prime law.
class ShapeParams {
 public:
  ShapeParams(double alpha, double beta);

  double alpha() const { return alpha_; }
  double beta() const { return beta_; }

 private:
  double alpha_;
  double beta_;
};

/// Mean-precision parameterization: E[Y] = mu, Var[Y] = mu (1 + mu) / phi.
class MeanPrecisionParams {
 public:
  MeanPrecisionParams(double mu, double phi);

  double mu() const { return mu_; }
  double phi() const { return phi_; }

 private:
  double mu_;
  double phi_;
};

ShapeParams to_shape(const MeanPrecisionParams& p);

/// Inverse of to_shape; only defined for beta > 2.
MeanPrecisionParams from_shape(const ShapeParams& s);

double log_pdf(double y, const ShapeParams& s);
double log_pdf(double y, const MeanPrecisionParams& p);
double pdf(double y, const ShapeParams& s);
double pdf(double y, const MeanPrecisionParams& p);

/// F(y) = I_{y/(1+y)}(alpha, beta).
double cdf(double y, const ShapeParams& s);
double cdf(double y, const MeanPrecisionParams& p);

double quantile(double u, const ShapeParams& s);
double quantile(double u, const MeanPrecisionParams& p);

/// Draws as the gamma ratio Ga(alpha, 1) / Ga(beta, 1).
std::vector<double> sample(const ShapeParams& s, std::size_t n, std::uint64_t seed);
std::vector<double> sample(const MeanPrecisionParams& p, std::size_t n, std::uint64_t seed);

/// A single gamma-ratio draw using a caller-owned generator.
double draw(const MeanPrecisionParams& p, Rng& rng);

/// Draws as Z / (1 - Z) with Z ~ Beta(alpha, beta).
std::vector<double> sample_via_beta(const ShapeParams& s, std::size_t n, std::uint64_t seed);

struct DistributionSummary {
  double mean = 0.0;
  double variance = 0.0;
  std::optional<double> skewness;  // phi > 1
  std::optional<double> kurtosis;  // phi > 2, non-excess
  std::optional<double> mode;      // alpha > 1
  std::optional<std::pair<double, double>> inflection_points;  // alpha > 2
};

DistributionSummary summary(const MeanPrecisionParams& p);

/// Roots of the pdf's second derivative for alpha > 2, from the closed form
///   x = [(a-1)(b+2) -/+ sqrt((a-1)(b+2)(a+b))] / ((b+2)(b+1)).
std::optional<std::pair<double, double>> inflection_points(const ShapeParams& s);

/// Variant of the closed form with (a-1)(a+2) in the leading term, as it
/// appears in parts of the literature. Kept for comparison only: it does not
/// locate the sign changes of f'' unless alpha == beta.
std::optional<std::pair<double, double>> printed_inflection_points(const ShapeParams& s);

}  // namespace bpreg
