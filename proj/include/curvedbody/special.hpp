#pragma once

#include <cmath>

namespace cb::special {

// Below this magnitude removable singularities are evaluated by series.
inline constexpr double kSeriesThreshold = 1e-2;

// sin(x)/x
inline double sinc(double x) {
  if (std::abs(x) < kSeriesThreshold) {
    const double x2 = x * x;
    return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
  }
  return std::sin(x) / x;
}

// (1 - cos x)/x^2
inline double versc2(double x) {
  if (std::abs(x) < kSeriesThreshold) {
    const double x2 = x * x;
    return 0.5 - x2 / 24.0 + x2 * x2 / 720.0;
  }
  return (1.0 - std::cos(x)) / (x * x);
}

// (x - sin x)/x^3
inline double sinc_defect3(double x) {
  if (std::abs(x) < kSeriesThreshold) {
    const double x2 = x * x;
    return 1.0 / 6.0 - x2 / 120.0 + x2 * x2 / 5040.0;
  }
  return (x - std::sin(x)) / (x * x * x);
}

// (sin x / x)^2
inline double sinc_sq(double x) {
  const double s = sinc(x);
  return s * s;
}

// d/dx (sin x / x)^2 divided by x, i.e. 2 sinc(x)(x cos x - sin x)/x^3
inline double sinc_sq_prime_over_x(double x) {
  if (std::abs(x) < kSeriesThreshold) {
    const double x2 = x * x;
    return -2.0 / 3.0 + 8.0 * x2 / 45.0 - 2.0 * x2 * x2 / 105.0;
  }
  return 2.0 * sinc(x) * (x * std::cos(x) - std::sin(x)) / (x * x * x);
}

// (1 - (sin x / x)^2)/x^2
inline double one_minus_sinc_sq_over_x2(double x) {
  if (std::abs(x) < kSeriesThreshold) {
    const double x2 = x * x;
    return 1.0 / 3.0 - 2.0 * x2 / 45.0 + x2 * x2 / 315.0;
  }
  return (1.0 - sinc_sq(x)) / (x * x);
}

}  // namespace cb::special
