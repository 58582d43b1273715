#include "bpreg/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bpreg {

double Rng::uniform() {
  // 53 random mantissa bits, offset by half a step so 0 and 1 never occur.
  const std::uint64_t bits = engine_() >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * factor;
  has_spare_ = true;
  return u * factor;
}

double Rng::gamma(double shape) {
  if (!(shape > 0.0) || !std::isfinite(shape)) {
    throw std::invalid_argument("Rng::gamma: shape must be positive and finite");
  }
  if (shape < 1.0) {
    const double g = gamma(shape + 1.0);
    return g * std::pow(uniform(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double Rng::beta(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw std::invalid_argument("Rng::beta: shapes must be positive and finite");
  }
  // R. C. H. Cheng (1978), algorithms BB (both shapes > 1) and BC.
  const double lo = std::min(a, b);
  const double hi = std::max(a, b);
  const double sum = lo + hi;
  constexpr double kLog4 = 1.3862943611198906;
  auto scaled_exp = [](double scale, double v) {
    const double w = scale * std::exp(v);
    return std::isfinite(w) ? w : std::numeric_limits<double>::max();
  };

  if (lo <= 1.0) {
    const double bet = 1.0 / lo;
    const double delta = 1.0 + hi - lo;
    const double k1 = delta * (0.0138889 + 0.0416667 * lo) / (hi * bet - 0.777778);
    const double k2 = 0.25 + (0.5 + 0.25 / delta) * lo;
    double w = 0.0;
    for (;;) {
      const double u1 = uniform();
      const double u2 = uniform();
      double z;
      if (u1 < 0.5) {
        const double y = u1 * u2;
        z = u1 * y;
        if (0.25 * u2 + z - y >= k1) continue;
      } else {
        z = u1 * u1 * u2;
        if (z <= 0.25) {
          w = scaled_exp(hi, bet * std::log(u1 / (1.0 - u1)));
          break;
        }
        if (z >= k2) continue;
      }
      const double v = bet * std::log(u1 / (1.0 - u1));
      w = scaled_exp(hi, v);
      if (sum * (std::log(sum / (lo + w)) + v) - kLog4 >= std::log(z)) break;
    }
    return a == lo ? lo / (lo + w) : w / (lo + w);
  }

  const double bet = std::sqrt((sum - 2.0) / (2.0 * lo * hi - sum));
  const double gam = lo + 1.0 / bet;
  double w;
  for (;;) {
    const double u1 = uniform();
    const double u2 = uniform();
    const double v = bet * std::log(u1 / (1.0 - u1));
    w = scaled_exp(lo, v);
    const double z = u1 * u1 * u2;
    const double r = gam * v - kLog4;
    const double s = lo + r - w;
    if (s + 2.609438 >= 5.0 * z) break;
    const double t = std::log(z);
    if (s > t) break;
    if (r + sum * std::log(sum / (hi + w)) >= t) break;
  }
  return a != lo ? hi / (hi + w) : w / (hi + w);
}

}  // namespace bpreg
