#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

#include "bpreg/distribution.hpp"
#include "bpreg/special_functions.hpp"
#include "doctest.h"
#include "stat_helpers.hpp"

using namespace bpreg;
using bpreg::special::DomainError;

namespace {

// Adaptive Gauss-Kronrod over t in (0, 1) after the map y = t / (1 - t).
double total_mass(const MeanPrecisionParams& p) {
  auto integrand = [&](double t) {
    const double y = t / (1.0 - t);
    return pdf(y, p) / ((1.0 - t) * (1.0 - t));
  };
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, 1.0, 15, 1e-11,
                                                                       &err);
}

// Exact raw moment E[Y^r] = prod_{i=1..r} (alpha + i - 1) / (beta - i).
double raw_moment(const ShapeParams& s, int r) {
  double out = 1.0;
  for (int i = 1; i <= r; ++i) out *= (s.alpha() + i - 1) / (s.beta() - i);
  return out;
}

double second_derivative_pdf(double y, const ShapeParams& s) {
  const double h = 1e-4 * std::max(y, 1e-3);
  return (pdf(y + h, s) - 2.0 * pdf(y, s) + pdf(y - h, s)) / (h * h);
}

}  // namespace

TEST_CASE("mean-precision to shape mapping") {
  const ShapeParams s1 = to_shape(MeanPrecisionParams(1.0, 1.0));
  CHECK(s1.alpha() == 2.0);
  CHECK(s1.beta() == 3.0);
  const ShapeParams s2 = to_shape(MeanPrecisionParams(0.5, 10.0));
  CHECK(s2.alpha() == 5.5);
  CHECK(s2.beta() == 12.0);
  const MeanPrecisionParams back = from_shape(s2);
  CHECK(back.mu() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(back.phi() == doctest::Approx(10.0).epsilon(1e-15));
  CHECK_THROWS_AS(from_shape(ShapeParams(3.0, 2.0)), DomainError);
  CHECK_THROWS_AS(MeanPrecisionParams(0.0, 1.0), DomainError);
  CHECK_THROWS_AS(MeanPrecisionParams(1.0, -1.0), DomainError);
  CHECK_THROWS_AS(ShapeParams(1.0, std::nan("")), DomainError);
}

TEST_CASE("density closed forms") {
  const MeanPrecisionParams p(1.0, 1.0);
  CHECK(std::abs(pdf(1.0, p) - 0.375) < 1e-14);
  CHECK(std::abs(pdf(2.0, p) - 24.0 / 243.0) < 1e-14);
  CHECK(std::abs(log_pdf(1.0, p) - std::log(0.375)) < 1e-14);
  CHECK_THROWS_AS(pdf(0.0, p), DomainError);
  CHECK_THROWS_AS(log_pdf(-1.0, p), DomainError);
}

TEST_CASE("density integrates to one on the mu x phi grid") {
  for (double mu : {0.5, 1.0, 2.0, 3.0}) {
    for (double phi : {1.0, 10.0, 100.0}) {
      INFO("mu=" << mu << " phi=" << phi);
      CHECK(std::abs(total_mass(MeanPrecisionParams(mu, phi)) - 1.0) < 1e-8);
    }
  }
}

TEST_CASE("cdf") {
  const MeanPrecisionParams p(1.0, 1.0);
  CHECK(std::abs(cdf(1.0, p) - 0.6875) < 1e-10);
  CHECK(cdf(0.0, p) == 0.0);
  CHECK(cdf(1e12, p) > 1.0 - 1e-12);
  CHECK_THROWS_AS(cdf(-0.1, p), DomainError);
  for (double y : {0.5, 2.0}) {
    const double h = 1e-5;
    CHECK(std::abs((cdf(y + h, p) - cdf(y - h, p)) / (2 * h) - pdf(y, p)) < 1e-6);
  }
  double prev = 0.0;
  for (int i = 1; i < 2000; ++i) {
    const double v = cdf(0.01 * i, MeanPrecisionParams(2.0, 4.0));
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("quantile") {
  const MeanPrecisionParams p(1.0, 1.0);
  CHECK(std::abs(quantile(0.6875, p) - 1.0) < 1e-10);
  for (double y : {0.1, 1.0, 10.0}) CHECK(std::abs(quantile(cdf(y, p), p) - y) < 1e-8);

  double lo = 0.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid, p) < 0.5) lo = mid; else hi = mid;
  }
  CHECK(std::abs(quantile(0.5, p) - lo) < 1e-10);

  for (double mu : {0.3, 2.0, 7.0}) {
    for (double phi : {0.5, 5.0, 60.0}) {
      const MeanPrecisionParams q(mu, phi);
      for (double u : {1e-6, 0.01, 0.3, 0.5, 0.8, 0.999, 1 - 1e-7}) {
        CHECK(std::abs(cdf(quantile(u, q), q) - u) < 1e-9);
      }
    }
  }
  CHECK_THROWS_AS(quantile(0.0, p), DomainError);
  CHECK_THROWS_AS(quantile(1.0, p), DomainError);
}

TEST_CASE("sampling moments and determinism") {
  const MeanPrecisionParams p(2.0, 4.0);
  const std::size_t n = 100000;
  const auto xs = sample(p, n, 42);
  const auto m = testing::moments(xs);
  CHECK(std::abs(m.mean - 2.0) < 3.0 * std::sqrt(1.5 / n));
  CHECK(std::abs(m.variance - 1.5) < 0.15);
  CHECK(sample(p, 100, 9) == sample(p, 100, 9));
  CHECK(sample(p, 100, 9) != sample(p, 100, 10));
  CHECK(sample(p, 0, 1).empty());
}

TEST_CASE("gamma-ratio sampler passes Kolmogorov-Smirnov against the cdf") {
  for (auto [mu, phi] : {std::pair{2.0, 4.0}, {0.5, 1.0}, {0.05, 3.0}, {5.0, 80.0}}) {
    const MeanPrecisionParams p(mu, phi);
    const auto xs = sample(p, 10000, 2024);
    const double d = testing::ks_statistic(xs, [&](double y) { return cdf(y, p); });
    INFO("mu=" << mu << " phi=" << phi << " D=" << d);
    CHECK(d < testing::ks_critical_one_sample(xs.size()));
  }
}

TEST_CASE("closure and representation properties") {
  const ShapeParams s(3.0, 4.0);
  const std::size_t n = 10000;

  SUBCASE("reciprocation") {
    auto xs = sample(s, n, 77);
    for (double& x : xs) x = 1.0 / x;
    const ShapeParams swapped(4.0, 3.0);
    CHECK(testing::ks_statistic(xs, [&](double y) { return cdf(y, swapped); }) <
          testing::ks_critical_one_sample(n));
  }
  SUBCASE("F scaling") {
    auto xs = sample(s, n, 78);
    for (double& x : xs) x *= s.beta() / s.alpha();
    auto f = [&](double x) { return special::f_cdf(x, 2.0 * s.alpha(), 2.0 * s.beta()); };
    CHECK(testing::ks_statistic(xs, f) < testing::ks_critical_one_sample(n));
  }
  SUBCASE("beta representation") {
    const auto via_beta = sample_via_beta(s, n, 79);
    const auto via_gamma = sample(s, n, 80);
    CHECK(testing::ks_two_sample(via_beta, via_gamma) < testing::ks_critical_two_sample(n, n));
    CHECK(testing::ks_statistic(via_beta, [&](double y) { return cdf(y, s); }) <
          testing::ks_critical_one_sample(n));
    const ShapeParams small(0.6, 0.8);
    CHECK(testing::ks_statistic(sample_via_beta(small, n, 81), [&](double y) { return cdf(y, small); }) <
          testing::ks_critical_one_sample(n));
  }
}

TEST_CASE("large-sample mean and variance within Monte Carlo error") {
  const MeanPrecisionParams p(2.0, 10.0);
  const ShapeParams s = to_shape(p);
  const std::size_t n = 1000000;
  const auto m = testing::moments(sample(p, n, 99));
  const double var = 2.0 * 3.0 / 10.0;
  // Exact fourth central moment from the raw moments.
  const double m1 = raw_moment(s, 1), m2 = raw_moment(s, 2), m3 = raw_moment(s, 3), m4 = raw_moment(s, 4);
  const double c4 = m4 - 4 * m1 * m3 + 6 * m1 * m1 * m2 - 3 * m1 * m1 * m1 * m1;
  CHECK(std::abs(m.mean - 2.0) < 4.0 * std::sqrt(var / n));
  CHECK(std::abs(m.variance - var) < 4.0 * std::sqrt((c4 - var * var) / n));
}

TEST_CASE("summary") {
  SUBCASE("skewness at mu=1, phi=2") {
    const auto s = summary(MeanPrecisionParams(1.0, 2.0));
    REQUIRE(s.skewness.has_value());
    CHECK(std::abs(*s.skewness - 6.0) < 1e-12);
    CHECK_FALSE(s.kurtosis.has_value());
  }
  SUBCASE("mode and absent moments at mu=1, phi=1") {
    const auto s = summary(MeanPrecisionParams(1.0, 1.0));
    REQUIRE(s.mode.has_value());
    CHECK(std::abs(*s.mode - 0.25) < 1e-15);
    CHECK_FALSE(s.skewness.has_value());
    CHECK_FALSE(s.kurtosis.has_value());
    CHECK_FALSE(s.inflection_points.has_value());
  }
  SUBCASE("skewness and kurtosis agree with exact moments") {
    for (auto [mu, phi] : {std::pair{1.0, 5.0}, {2.5, 7.0}, {0.3, 3.5}, {4.0, 40.0}}) {
      const MeanPrecisionParams p(mu, phi);
      const ShapeParams sh = to_shape(p);
      const double m1 = raw_moment(sh, 1), m2 = raw_moment(sh, 2), m3 = raw_moment(sh, 3),
                   m4 = raw_moment(sh, 4);
      const double var = m2 - m1 * m1;
      const double skew = (m3 - 3 * m1 * m2 + 2 * m1 * m1 * m1) / std::pow(var, 1.5);
      const double kurt = (m4 - 4 * m1 * m3 + 6 * m1 * m1 * m2 - 3 * m1 * m1 * m1 * m1) / (var * var);
      const auto s = summary(p);
      CHECK(s.mean == mu);
      CHECK(std::abs(s.variance - var) < 1e-12 * var);
      CHECK(std::abs(*s.skewness - skew) < 1e-10 * skew);
      CHECK(std::abs(*s.kurtosis - kurt) < 1e-10 * kurt);
    }
    // Values frozen from the exact-moment evaluation above.
    CHECK(std::abs(*summary(MeanPrecisionParams(1.0, 5.0)).skewness - 2.3717082451262845) < 1e-12);
    CHECK(std::abs(*summary(MeanPrecisionParams(1.0, 5.0)).kurtosis - 16.25) < 1e-12);
  }
  SUBCASE("Monte Carlo third moment") {
    const MeanPrecisionParams p(1.0, 10.0);
    const auto m = testing::moments(sample(p, 1000000, 5));
    CHECK(std::abs(m.skewness - *summary(p).skewness) < 0.05 * *summary(p).skewness);
  }
}

TEST_CASE("inflection points are sign changes of the second derivative") {
  for (auto [a, b] : {std::pair{3.0, 4.0}, {5.5, 12.0}, {2.5, 30.0}, {12.0, 3.0}}) {
    const ShapeParams s(a, b);
    const auto pts = inflection_points(s);
    REQUIRE(pts.has_value());
    CHECK(pts->first < pts->second);
    CHECK(pts->first > 0.0);
    for (double x : {pts->first, pts->second}) {
      const double before = second_derivative_pdf(x * (1 - 1e-3), s);
      const double after = second_derivative_pdf(x * (1 + 1e-3), s);
      INFO("alpha=" << a << " beta=" << b << " x=" << x);
      CHECK(before * after < 0.0);
    }
    const auto printed = printed_inflection_points(s);
    MESSAGE("alpha=" << a << " beta=" << b << ": (a-1)(b+2) form gives (" << pts->first << ", "
                     << pts->second << "); (a-1)(a+2) form gives (" << printed->first << ", "
                     << printed->second << ")");
  }
  // The two forms coincide when alpha == beta.
  const ShapeParams sym(4.0, 4.0);
  CHECK(std::abs(inflection_points(sym)->first - printed_inflection_points(sym)->first) < 1e-15);
  CHECK_FALSE(inflection_points(ShapeParams(2.0, 3.0)).has_value());
}
