#include "bpreg/distribution.hpp"

#include <cmath>
#include <string>

#include "bpreg/special_functions.hpp"

namespace bpreg {

using special::DomainError;

namespace {

void require_positive(double v, const char* what) {
  if (!std::isfinite(v) || !(v > 0.0)) {
    throw DomainError(std::string(what) + " must be positive and finite");
  }
}

}  // namespace

ShapeParams::ShapeParams(double alpha, double beta) : alpha_(alpha), beta_(beta) {
  require_positive(alpha, "alpha");
  require_positive(beta, "beta");
}

MeanPrecisionParams::MeanPrecisionParams(double mu, double phi) : mu_(mu), phi_(phi) {
  require_positive(mu, "mu");
  require_positive(phi, "phi");
}

ShapeParams to_shape(const MeanPrecisionParams& p) {
  return ShapeParams(p.mu() * (1.0 + p.phi()), 2.0 + p.phi());
}

MeanPrecisionParams from_shape(const ShapeParams& s) {
  if (!(s.beta() > 2.0)) throw DomainError("from_shape: requires beta > 2");
  return MeanPrecisionParams(s.alpha() / (s.beta() - 1.0), s.beta() - 2.0);
}

double log_pdf(double y, const ShapeParams& s) {
  if (!std::isfinite(y) || !(y > 0.0)) throw DomainError("log_pdf: requires finite y > 0");
  const double a = s.alpha();
  const double b = s.beta();
  return (a - 1.0) * std::log(y) - (a + b) * std::log1p(y) - special::log_beta(a, b);
}

double log_pdf(double y, const MeanPrecisionParams& p) { return log_pdf(y, to_shape(p)); }

double pdf(double y, const ShapeParams& s) { return std::exp(log_pdf(y, s)); }

double pdf(double y, const MeanPrecisionParams& p) { return std::exp(log_pdf(y, p)); }

double cdf(double y, const ShapeParams& s) {
  if (!std::isfinite(y) || y < 0.0) throw DomainError("cdf: requires finite y >= 0");
  if (y == 0.0) return 0.0;
  return special::reg_inc_beta(y / (1.0 + y), 1.0 / (1.0 + y), s.alpha(), s.beta());
}

double cdf(double y, const MeanPrecisionParams& p) { return cdf(y, to_shape(p)); }

double quantile(double u, const ShapeParams& s) {
  if (!std::isfinite(u) || !(u > 0.0 && u < 1.0)) throw DomainError("quantile: requires 0 < u < 1");
  if (u <= 0.5) {
    const double t = special::reg_inc_beta_inv(u, s.alpha(), s.beta());
    return t / (1.0 - t);
  }
  // Upper half: solve for 1 - t through the reflection I_x(a,b) = 1 - I_{1-x}(b,a)
  // so that y = (1 - t) / t' keeps full precision as t approaches one.
  const double tc = special::reg_inc_beta_inv(1.0 - u, s.beta(), s.alpha());
  return (1.0 - tc) / tc;
}

double quantile(double u, const MeanPrecisionParams& p) { return quantile(u, to_shape(p)); }

std::vector<double> sample(const ShapeParams& s, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(rng.gamma(s.alpha()) / rng.gamma(s.beta()));
  return out;
}

std::vector<double> sample(const MeanPrecisionParams& p, std::size_t n, std::uint64_t seed) {
  return sample(to_shape(p), n, seed);
}

double draw(const MeanPrecisionParams& p, Rng& rng) {
  const ShapeParams s = to_shape(p);
  return rng.gamma(s.alpha()) / rng.gamma(s.beta());
}

std::vector<double> sample_via_beta(const ShapeParams& s, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = rng.beta(s.alpha(), s.beta());
    out.push_back(z / (1.0 - z));
  }
  return out;
}

std::optional<std::pair<double, double>> inflection_points(const ShapeParams& s) {
  const double a = s.alpha();
  const double b = s.beta();
  if (!(a > 2.0)) return std::nullopt;
  const double lead = (a - 1.0) * (b + 2.0);
  const double root = std::sqrt((a - 1.0) * (b + 2.0) * (a + b));
  const double denom = (b + 2.0) * (b + 1.0);
  return std::make_pair((lead - root) / denom, (lead + root) / denom);
}

std::optional<std::pair<double, double>> printed_inflection_points(const ShapeParams& s) {
  const double a = s.alpha();
  const double b = s.beta();
  if (!(a > 2.0)) return std::nullopt;
  const double lead = (a - 1.0) * (a + 2.0);
  const double root = std::sqrt((a - 1.0) * (b + 2.0) * (a + b));
  const double denom = (b + 2.0) * (b + 1.0);
  return std::make_pair((lead - root) / denom, (lead + root) / denom);
}

DistributionSummary summary(const MeanPrecisionParams& p) {
  const double mu = p.mu();
  const double phi = p.phi();
  const double v = mu * (1.0 + mu);
  const ShapeParams s = to_shape(p);

  DistributionSummary out;
  out.mean = mu;
  out.variance = v / phi;
  if (phi > 1.0) {
    out.skewness = 2.0 * (1.0 + phi) * (1.0 + 2.0 * mu) / (phi - 1.0) *
                   std::sqrt(phi / (v * (1.0 + phi) * (1.0 + phi)));
  }
  if (phi > 2.0) {
    const double d = (phi - 2.0) * (phi - 1.0);
    out.kurtosis = 6.0 * ((5.0 * phi - 1.0) / d + phi / (v * d)) + 3.0;
  }
  if (s.alpha() > 1.0) out.mode = (s.alpha() - 1.0) / (s.beta() + 1.0);
  out.inflection_points = inflection_points(s);
  return out;
}

}  // namespace bpreg
