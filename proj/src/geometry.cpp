#include "curvedbody/geometry.hpp"

#include "curvedbody/numdiff.hpp"
#include "curvedbody/special.hpp"

#include <cmath>
#include <numbers>

namespace cb {

namespace {

constexpr double kPi = std::numbers::pi;

// u(x) = (1 - sinc²x)/x²; returns u'(x)/x.
double sphere3_u_prime_over_x(double x) {
  if (std::abs(x) < 0.03) {
    const double x2 = x * x;
    return -4.0 / 45.0 + 4.0 * x2 / 315.0 - 12.0 * x2 * x2 / 14175.0;
  }
  return -(special::sinc_sq_prime_over_x(x) + 2.0 * special::one_minus_sinc_sq_over_x2(x)) / (x * x);
}

Tensor3d sphere3_metric_derivative(double R, const VecX& p) {
  const double r = p.norm();
  const double x = r / R;
  const double R2 = R * R;
  const double fp = special::sinc_sq_prime_over_x(x) / R2;  // f'(r) n_k = fp * r_k
  const double h = special::one_minus_sinc_sq_over_x2(x) / R2;
  const double hp = sphere3_u_prime_over_x(x) / (R2 * R2);  // h'(r) n_k = hp * r_k
  Tensor3d dg(3);
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double v = hp * p(k) * p(i) * p(j);
        if (i == j) v += fp * p(k);
        if (i == k) v += h * p(j);
        if (j == k) v += h * p(i);
        dg(k, i, j) = v;
      }
  return dg;
}

Tensor3d analytic_levi_civita_2d(const Chart& c, const VecX& x) {
  Tensor3d g(2);
  const double u = x(0);
  switch (c.kind) {
    case ChartKind::Sphere2: {
      const double t = u / c.R;
      g(0, 1, 1) = -c.R * std::sin(t) * std::cos(t);
      g(1, 0, 1) = g(1, 1, 0) = std::cos(t) / (c.R * std::sin(t));
      break;
    }
    case ChartKind::Pseudosphere2: {
      const double t = u / c.R;
      g(0, 1, 1) = -c.R * std::sinh(t) * std::cosh(t);
      g(1, 0, 1) = g(1, 1, 0) = std::cosh(t) / (c.R * std::sinh(t));
      break;
    }
    case ChartKind::Torus2: {
      const double w = c.L + c.R * std::cos(u);
      g(0, 1, 1) = (c.L / c.R + std::cos(u)) * std::sin(u);
      g(1, 0, 1) = g(1, 1, 0) = -c.R * std::sin(u) / w;
      break;
    }
    default:
      break;
  }
  return g;
}

std::vector<Tensor3d> analytic_levi_civita_derivative_2d(const Chart& c, const VecX& x) {
  std::vector<Tensor3d> d(2, Tensor3d(2));
  const double u = x(0);
  Tensor3d& g = d[0];
  switch (c.kind) {
    case ChartKind::Sphere2: {
      const double t = u / c.R;
      const double s = std::sin(t);
      g(0, 1, 1) = -std::cos(2 * t);
      g(1, 0, 1) = g(1, 1, 0) = -1.0 / (c.R * c.R * s * s);
      break;
    }
    case ChartKind::Pseudosphere2: {
      const double t = u / c.R;
      const double s = std::sinh(t);
      g(0, 1, 1) = -std::cosh(2 * t);
      g(1, 0, 1) = g(1, 1, 0) = -1.0 / (c.R * c.R * s * s);
      break;
    }
    case ChartKind::Torus2: {
      const double w = c.L + c.R * std::cos(u);
      g(0, 1, 1) = (c.L / c.R) * std::cos(u) + std::cos(2 * u);
      g(1, 0, 1) = g(1, 1, 0) = -(c.R * c.L * std::cos(u) + c.R * c.R) / (w * w);
      break;
    }
    default:
      break;
  }
  return d;
}

bool analytic_2d(ChartKind k) {
  return k == ChartKind::Sphere2 || k == ChartKind::Pseudosphere2 || k == ChartKind::Torus2;
}

}  // namespace

std::string Chart::name() const {
  switch (kind) {
    case ChartKind::Sphere2: return "sphere2";
    case ChartKind::Pseudosphere2: return "pseudosphere2";
    case ChartKind::Torus2: return "torus2";
    case ChartKind::Sphere3: return "sphere3";
    case ChartKind::Flat: return "flat" + std::to_string(dim);
    case ChartKind::Custom: return "custom";
  }
  return "unknown";
}

Chart sphere2(double R) {
  Chart c{ChartKind::Sphere2, 2, R, 0.0, 1e-6, {}};
  validate(c);
  return c;
}

Chart pseudosphere2(double R) {
  Chart c{ChartKind::Pseudosphere2, 2, R, 0.0, 1e-6, {}};
  validate(c);
  return c;
}

Chart torus2(double L, double R) {
  Chart c{ChartKind::Torus2, 2, R, L, 1e-6, {}};
  validate(c);
  return c;
}

Chart sphere3(double R) {
  Chart c{ChartKind::Sphere3, 3, R, 0.0, 1e-6, {}};
  validate(c);
  return c;
}

Chart flat(int n) {
  if (n < 1) throw Error(ErrorKind::BadParams, "flat chart dimension must be positive");
  return Chart{ChartKind::Flat, n, 1.0, 0.0, 1e-6, {}};
}

Chart custom(int n, MetricFn metric) {
  if (n < 1 || !metric) throw Error(ErrorKind::BadParams, "custom chart needs a dimension and a metric");
  Chart c{ChartKind::Custom, n, 1.0, 0.0, 1e-6, std::move(metric)};
  return c;
}

Chart chart_from_name(const std::string& name, double R, double L) {
  if (name == "sphere2") return sphere2(R);
  if (name == "pseudosphere2") return pseudosphere2(R);
  if (name == "torus2") return torus2(L, R);
  if (name == "sphere3") return sphere3(R);
  if (name.rfind("flat", 0) == 0) {
    const std::string tail = name.substr(4);
    return flat(tail.empty() ? 2 : std::stoi(tail));
  }
  throw Error(ErrorKind::BadParams, "unknown chart '" + name + "'");
}

void validate(const Chart& c) {
  if (!(c.R > 0)) throw Error(ErrorKind::BadParams, "R must be positive");
  if (c.kind == ChartKind::Torus2 && !(c.L > c.R)) throw Error(ErrorKind::BadParams, "L must exceed R");
  if (!(c.margin >= 0)) throw Error(ErrorKind::BadParams, "margin must be non-negative");
}

void check_point(const Chart& c, const VecX& x) {
  if (x.size() != c.dim)
    throw Error(ErrorKind::DimensionMismatch, "point has dimension " + std::to_string(x.size()) +
                                                  ", chart " + c.name() + " expects " + std::to_string(c.dim));
  if (!x.allFinite()) throw Error(ErrorKind::SingularPoint, "non-finite coordinates");
  switch (c.kind) {
    case ChartKind::Sphere2:
      if (x(0) <= c.margin || x(0) >= kPi * c.R - c.margin)
        throw Error(ErrorKind::SingularPoint, "sphere2 pole at r = " + std::to_string(x(0)));
      break;
    case ChartKind::Pseudosphere2:
      if (x(0) <= c.margin) throw Error(ErrorKind::SingularPoint, "pseudosphere2 centre at r = " + std::to_string(x(0)));
      break;
    case ChartKind::Sphere3: {
      const double r = x.norm();
      if (r <= c.margin || r >= kPi * c.R - c.margin)
        throw Error(ErrorKind::SingularPoint, "sphere3 chart singular at |r| = " + std::to_string(r));
      break;
    }
    default:
      break;
  }
}

MatX metric_at(const Chart& c, const VecX& x) {
  check_point(c, x);
  switch (c.kind) {
    case ChartKind::Sphere2: {
      const double w = c.R * std::sin(x(0) / c.R);
      return Eigen::Vector2d(1.0, w * w).asDiagonal();
    }
    case ChartKind::Pseudosphere2: {
      const double w = c.R * std::sinh(x(0) / c.R);
      return Eigen::Vector2d(1.0, w * w).asDiagonal();
    }
    case ChartKind::Torus2: {
      const double w = c.L + c.R * std::cos(x(0));
      return Eigen::Vector2d(c.R * c.R, w * w).asDiagonal();
    }
    case ChartKind::Sphere3: {
      const double r = x.norm();
      const double f = special::sinc_sq(r / c.R);
      const double h = special::one_minus_sinc_sq_over_x2(r / c.R) / (c.R * c.R);
      return f * MatX::Identity(3, 3) + h * x * x.transpose();
    }
    case ChartKind::Flat:
      return MatX::Identity(c.dim, c.dim);
    case ChartKind::Custom: {
      MatX g = c.custom_metric(x);
      if (g.rows() != c.dim || g.cols() != c.dim)
        throw Error(ErrorKind::DimensionMismatch, "custom metric has wrong shape");
      return g;
    }
  }
  return MatX();
}

Tensor3d metric_derivative_at(const Chart& c, const VecX& x) {
  check_point(c, x);
  const int n = c.dim;
  Tensor3d dg(n);
  switch (c.kind) {
    case ChartKind::Sphere2: {
      const double t = x(0) / c.R;
      dg(0, 1, 1) = c.R * std::sin(2 * t);
      return dg;
    }
    case ChartKind::Pseudosphere2: {
      const double t = x(0) / c.R;
      dg(0, 1, 1) = c.R * std::sinh(2 * t);
      return dg;
    }
    case ChartKind::Torus2: {
      const double w = c.L + c.R * std::cos(x(0));
      dg(0, 1, 1) = -2.0 * w * c.R * std::sin(x(0));
      return dg;
    }
    case ChartKind::Sphere3:
      return sphere3_metric_derivative(c.R, x);
    case ChartKind::Flat:
      return dg;
    case ChartKind::Custom: {
      for (int k = 0; k < n; ++k)
        dg.slice(k) = numdiff::partial([&](const VecX& y) { return c.custom_metric(y); }, x, k,
                                       numdiff::Step::Cbrt);
      return dg;
    }
  }
  return dg;
}

Tensor3d levi_civita_at(const Chart& c, const VecX& x) {
  check_point(c, x);
  if (analytic_2d(c.kind)) return analytic_levi_civita_2d(c, x);
  if (c.kind == ChartKind::Flat) return Tensor3d(c.dim);
  const MatX g = metric_at(c, x);
  return christoffel_from_metric<double>(g.inverse(), metric_derivative_at(c, x));
}

Tensor3d torsion_of(const Tensor3d& gamma) {
  const int n = gamma.dim();
  Tensor3d s(n);
  for (int i = 0; i < n; ++i) s.slice(i) = skew_part<double>(gamma.slice(i));
  return s;
}

Tensor3d contortion_from_torsion(const MatX& g, const Tensor3d& S) {
  const int n = S.dim();
  Tensor3d low(n);  // S_abc = g_al S^l_bc
  for (int a = 0; a < n; ++a)
    for (int l = 0; l < n; ++l) low.slice(a) += g(a, l) * S.slice(l);
  Tensor3d klow(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) klow(i, j, k) = low(i, j, k) + low(j, k, i) + low(k, j, i);
  const MatX gi = g.inverse();
  Tensor3d K(n);
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < n; ++l) K.slice(i) += gi(i, l) * klow.slice(l);
  return K;
}

Geometry::Geometry(Chart chart) : chart_(std::move(chart)) { validate(chart_); }

Geometry::Geometry(Chart chart, ConnectionFn gamma, bool metric_compatible)
    : chart_(std::move(chart)), gamma_fn_(std::move(gamma)), metric_compatible_(metric_compatible) {
  validate(chart_);
}

Geometry Geometry::riemann_cartan(Chart chart, TorsionFn torsion) {
  Chart c = chart;
  auto fn = [c, torsion](const VecX& x) {
    const MatX g = metric_at(c, x);
    return levi_civita_at(c, x) + contortion_from_torsion(g, torsion(x));
  };
  return Geometry(std::move(chart), fn, true);
}

MatX Geometry::metric(const VecX& x) const { return metric_at(chart_, x); }

MatX Geometry::inverse_metric(const VecX& x) const { return metric(x).inverse(); }

Tensor3d Geometry::metric_derivative(const VecX& x) const { return metric_derivative_at(chart_, x); }

Tensor3d Geometry::levi_civita(const VecX& x) const { return levi_civita_at(chart_, x); }

Tensor3d Geometry::gamma(const VecX& x) const {
  if (!gamma_fn_) return levi_civita(x);
  check_point(chart_, x);
  Tensor3d gm = gamma_fn_(x);
  if (gm.dim() != chart_.dim) throw Error(ErrorKind::DimensionMismatch, "connection has wrong dimension");
  return gm;
}

std::vector<Tensor3d> Geometry::gamma_derivative(const VecX& x) const {
  check_point(chart_, x);
  if (!gamma_fn_ && analytic_2d(chart_.kind)) return analytic_levi_civita_derivative_2d(chart_, x);
  if (!gamma_fn_ && chart_.kind == ChartKind::Flat)
    return std::vector<Tensor3d>(chart_.dim, Tensor3d(chart_.dim));
  std::vector<Tensor3d> d;
  d.reserve(chart_.dim);
  for (int k = 0; k < chart_.dim; ++k)
    d.push_back(numdiff::partial([this](const VecX& y) { return gamma(y); }, x, k, numdiff::Step::Quint));
  return d;
}

Tensor4d Geometry::curvature(const VecX& x) const {
  return riemann_from_connection<double>(gamma(x), gamma_derivative(x));
}

double Geometry::scalar_curvature(const VecX& x) const {
  const Tensor4d r = curvature(x);
  const MatX gi = inverse_metric(x);
  const int n = dim();
  double s = 0;
  for (int b = 0; b < n; ++b)
    for (int j = 0; j < n; ++j) {
      double ric = 0;
      for (int a = 0; a < n; ++a) ric += r(a, b, a, j);
      s += gi(b, j) * ric;
    }
  return s;
}

Tensor3d Geometry::torsion(const VecX& x) const {
  if (!gamma_fn_) return Tensor3d(dim());
  return torsion_of(gamma(x));
}

TorsionContortion torsion_contortion_at(const Geometry& geo, const VecX& x) {
  TorsionContortion out;
  const Tensor3d g = geo.gamma(x);
  const Tensor3d lc = geo.levi_civita(x);
  const MatX metric = geo.metric(x);
  out.torsion = torsion_of(g);
  out.contortion = contortion_from_torsion(metric, out.torsion);
  out.difference = g - lc;
  out.reconstruction_residual = (lc + out.contortion - g).max_abs();
  const int n = geo.dim();
  Tensor3d klow(n);
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < n; ++l) klow.slice(i) += metric(i, l) * out.contortion.slice(l);
  double skew = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) skew = std::max(skew, std::abs(klow(i, j, k) + klow(j, i, k)));
  out.contortion_skew_residual = skew;
  return out;
}

Tensor4d curvature_at(const Geometry& geometry, const VecX& x) { return geometry.curvature(x); }

double metric_compatibility_residual(const Geometry& geo, const VecX& x) {
  const MatX g = geo.metric(x);
  const Tensor3d dg = geo.metric_derivative(x);
  const Tensor3d gm = geo.gamma(x);
  const int n = geo.dim();
  double res = 0;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double v = dg(k, i, j);
        for (int l = 0; l < n; ++l) v -= gm(l, i, k) * g(l, j) + gm(l, j, k) * g(i, l);
        res = std::max(res, std::abs(v));
      }
  return res;
}

VecX covariant_derivative_along(const Geometry& geo, const VecX& point, const VecX& velocity,
                                const VecX& vector, const VecX& vector_rate) {
  const int n = geo.dim();
  if (velocity.size() != n || vector.size() != n || vector_rate.size() != n)
    throw Error(ErrorKind::DimensionMismatch, "covariant derivative arguments must match the chart dimension");
  const Tensor3d gm = geo.gamma(point);
  VecX out = vector_rate;
  for (int i = 0; i < n; ++i) out(i) += vector.dot(gm.slice(i) * velocity);
  return out;
}

std::function<VecX(const VecX&, const VecX&, const VecX&, const VecX&)> covariant_derivative_callback(
    const Geometry& geometry) {
  return [geometry](const VecX& x, const VecX& v, const VecX& X, const VecX& Xdot) {
    return covariant_derivative_along(geometry, x, v, X, Xdot);
  };
}

}  // namespace cb
