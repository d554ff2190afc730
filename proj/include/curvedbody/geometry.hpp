#pragma once

#include "curvedbody/types.hpp"

#include <functional>
#include <string>

namespace cb {

enum class ChartKind { Sphere2, Pseudosphere2, Torus2, Sphere3, Flat, Custom };

using MetricFn = std::function<MatX(const VecX&)>;
using ConnectionFn = std::function<Tensor3d(const VecX&)>;
using TorsionFn = std::function<Tensor3d(const VecX&)>;

/// Coordinate chart of a base manifold.
///
/// Coordinates: sphere2 and pseudosphere2 use (r, φ) with r the geodesic
/// distance from the pole; torus2 uses (ϑ, φ); sphere3 uses the radius-scaled
/// rotation vector r̄ with |r̄| < πR; flat(n) uses Cartesian coordinates.
struct Chart {
  ChartKind kind = ChartKind::Flat;
  int dim = 2;
  double R = 1.0;
  double L = 0.0;
  double margin = 1e-6;
  MetricFn custom_metric;

  std::string name() const;
};

Chart sphere2(double R);
Chart pseudosphere2(double R);
Chart torus2(double L, double R);
Chart sphere3(double R);
Chart flat(int n);
Chart custom(int n, MetricFn metric);

/// Parses "sphere2", "pseudosphere2", "torus2", "sphere3", "flat2", "flat3".
Chart chart_from_name(const std::string& name, double R, double L);

/// Throws SingularPoint if x lies within the chart margin of an excluded locus.
void check_point(const Chart& chart, const VecX& x);

/// Throws BadParams unless the chart parameters are admissible.
void validate(const Chart& chart);

MatX metric_at(const Chart& chart, const VecX& x);

/// D(k, i, j) = ∂_k g_ij.
Tensor3d metric_derivative_at(const Chart& chart, const VecX& x);

/// Γ^i_jk = ½ g^im (∂_k g_mj + ∂_j g_mk − ∂_m g_jk).
template <typename Scalar>
Tensor3<Scalar> christoffel_from_metric(const Mat<Scalar>& g_inv, const Tensor3<Scalar>& dg) {
  const int n = static_cast<int>(g_inv.rows());
  Tensor3<Scalar> gamma(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        Scalar acc = 0;
        for (int m = 0; m < n; ++m)
          acc += g_inv(i, m) * (dg(k, m, j) + dg(j, m, k) - dg(m, j, k));
        gamma(i, j, k) = acc / Scalar(2);
      }
  return gamma;
}

/// ℛ^a_bij = ∂_i Γ^a_bj − ∂_j Γ^a_bi + Γ^a_ci Γ^c_bj − Γ^a_cj Γ^c_bi,
/// where dgamma[k](a, b, c) = ∂_k Γ^a_bc.
template <typename Scalar>
Tensor4<Scalar> riemann_from_connection(const Tensor3<Scalar>& gamma,
                                        const std::vector<Tensor3<Scalar>>& dgamma) {
  const int n = gamma.dim();
  Tensor4<Scalar> r(n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          Scalar acc = dgamma[i](a, b, j) - dgamma[j](a, b, i);
          for (int c = 0; c < n; ++c)
            acc += gamma(a, c, i) * gamma(c, b, j) - gamma(a, c, j) * gamma(c, b, i);
          r(a, b, i, j) = acc;
        }
  return r;
}

/// Levi-Civita connection of the chart metric.
Tensor3d levi_civita_at(const Chart& chart, const VecX& x);

/// Torsion S^i_jk = (Γ^i_jk − Γ^i_kj)/2.
Tensor3d torsion_of(const Tensor3d& gamma);

/// Contortion K^i_jk = g^il (S_ljk + S_jkl + S_kjl) with S_abc = g_al S^l_bc.
Tensor3d contortion_from_torsion(const MatX& g, const Tensor3d& torsion);

/// Affine connection on a chart: Levi-Civita, an arbitrary connection field,
/// or a Riemann–Cartan connection {} + K built from a torsion field.
class Geometry {
 public:
  explicit Geometry(Chart chart);
  Geometry(Chart chart, ConnectionFn gamma, bool metric_compatible);
  static Geometry riemann_cartan(Chart chart, TorsionFn torsion);

  const Chart& chart() const { return chart_; }
  int dim() const { return chart_.dim; }
  bool is_levi_civita() const { return !gamma_fn_; }
  bool is_metric_compatible() const { return metric_compatible_; }

  MatX metric(const VecX& x) const;
  MatX inverse_metric(const VecX& x) const;
  Tensor3d metric_derivative(const VecX& x) const;
  Tensor3d gamma(const VecX& x) const;
  Tensor3d levi_civita(const VecX& x) const;
  /// Entry k holds ∂_k Γ^a_bc.
  std::vector<Tensor3d> gamma_derivative(const VecX& x) const;
  Tensor4d curvature(const VecX& x) const;
  /// R_bj = ℛ^a_baj contracted with g^bj.
  double scalar_curvature(const VecX& x) const;
  Tensor3d torsion(const VecX& x) const;

 private:
  Chart chart_;
  ConnectionFn gamma_fn_;
  bool metric_compatible_ = true;
};

struct TorsionContortion {
  Tensor3d torsion;
  Tensor3d contortion;
  Tensor3d difference;  // 𝒦 = Γ − {}
  double reconstruction_residual = 0;  // max |{} + K − Γ|
  double contortion_skew_residual = 0; // max |K_ijk + K_jik|
};

TorsionContortion torsion_contortion_at(const Geometry& geometry, const VecX& x);

Tensor4d curvature_at(const Geometry& geometry, const VecX& x);

/// max_{k,i,j} |∇_k g_ij|.
double metric_compatibility_residual(const Geometry& geometry, const VecX& x);

/// (DX/Dt)^i = dX^i/dt + Γ^i_jk X^j dx^k/dt.
VecX covariant_derivative_along(const Geometry& geometry, const VecX& point,
                                const VecX& velocity, const VecX& vector, const VecX& vector_rate);

/// Callback form for use inside integrators.
std::function<VecX(const VecX&, const VecX&, const VecX&, const VecX&)> covariant_derivative_callback(
    const Geometry& geometry);

}  // namespace cb
