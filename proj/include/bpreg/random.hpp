#pragma once

#include <cstdint>
#include <random>

namespace bpreg {

/// Seedable generator with platform-independent variate algorithms.
///
/// The standard library distributions are implementation-defined, so uniform,
/// normal and gamma variates are produced here from the raw 64-bit engine to
/// keep every simulated result reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on the open interval (0, 1).
  double uniform();

  /// Standard normal (Marsaglia polar method).
  double normal();

  /// Gamma(shape, 1) via Marsaglia-Tsang squeeze/rejection; shapes below one
  /// use the Gamma(shape + 1) * U^(1/shape) boost.
  double gamma(double shape);

  /// Beta(a, b) by Cheng's rejection algorithms, independent of gamma().
  double beta(double a, double b);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace bpreg
