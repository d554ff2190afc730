#pragma once

#include "curvedbody/types.hpp"

#include <cmath>
#include <limits>

namespace cb::numdiff {

// Cbrt balances truncation and roundoff for one differentiation; Quint is used
// when the differentiated function is itself a finite difference.
enum class Step { Cbrt, Quint };

inline double step_for(double x, Step s) {
  constexpr double eps = std::numeric_limits<double>::epsilon();
  const double base = (s == Step::Cbrt) ? std::cbrt(eps) : std::pow(eps, 0.2);
  return base * std::max(1.0, std::abs(x));
}

inline bool finite_value(double v) { return std::isfinite(v); }
template <typename Derived>
bool finite_value(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}
template <typename Scalar>
bool finite_value(const Tensor3<Scalar>& t) {
  for (int i = 0; i < t.dim(); ++i)
    if (!t.slice(i).allFinite()) return false;
  return true;
}

// Fourth-order central difference of a scalar-argument function.
template <typename F>
auto derivative(F&& f, double x, double h) {
  auto a = f(x + h);
  auto b = f(x - h);
  auto c = f(x + 2 * h);
  auto d = f(x - 2 * h);
  decltype(a) r = (1.0 / (12.0 * h)) * (8.0 * (a - b) - (c - d));
  if (!finite_value(r))
    throw Error(ErrorKind::NumericalDifferentiationFailure, "non-finite difference quotient");
  return r;
}

// Partial derivative along coordinate k of a function of a vector argument.
template <typename F>
auto partial(F&& f, const VecX& x, int k, Step s = Step::Cbrt) {
  const double h = step_for(x(k), s);
  if (!(h > 0))
    throw Error(ErrorKind::NumericalDifferentiationFailure, "step underflow");
  VecX y = x;
  return derivative(
      [&](double t) {
        y(k) = t;
        return f(static_cast<const VecX&>(y));
      },
      x(k), h);
}

// Gradient of a scalar function.
template <typename F>
VecX gradient(F&& f, const VecX& x, Step s = Step::Cbrt) {
  VecX g(x.size());
  for (int k = 0; k < x.size(); ++k) g(k) = partial(f, x, k, s);
  return g;
}

}  // namespace cb::numdiff
