#pragma once

#include <stdexcept>
#include <string>

namespace bpreg::special {

/// Raised when a special function is evaluated outside its domain, including
/// NaN and infinite arguments.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Convergence controls for the iterative evaluators (continued fractions,
/// series, root finding).
struct SpecialFnConfig {
  double rel_tolerance = 1e-12;
  int max_iterations = 200;

  void validate() const;
};

double log_gamma(double z);
double digamma(double z);
double trigamma(double z);

/// log B(a, b) = lnΓ(a) + lnΓ(b) - lnΓ(a + b).
double log_beta(double a, double b);

/// Regularized incomplete beta function I_x(a, b).
double reg_inc_beta(double x, double a, double b, const SpecialFnConfig& cfg = {});

/// I_x(a, b) evaluated from both x and its complement 1 - x. Callers that
/// know 1 - x more accurately than the subtraction would give (for example
/// x = y / (1 + y), 1 - x = 1 / (1 + y)) should use this overload.
double reg_inc_beta(double x, double x_complement, double a, double b,
                    const SpecialFnConfig& cfg = {});

/// Inverse of I_x(a, b) in x. Newton iterations safeguarded by a bisection
/// bracket; |I_x - p| <= 1e-10 on return.
double reg_inc_beta_inv(double p, double a, double b, const SpecialFnConfig& cfg = {});

/// Regularized lower incomplete gamma P(a, x).
double reg_lower_gamma(double a, double x, const SpecialFnConfig& cfg = {});

double std_normal_cdf(double x);
double std_normal_quantile(double p);

/// Upper tail probability of a chi-squared variate with `df` degrees of freedom.
double chi_squared_sf(double x, double df);

/// Cdf of Snedecor's F(d1, d2).
double f_cdf(double x, double d1, double d2);

}  // namespace bpreg::special
