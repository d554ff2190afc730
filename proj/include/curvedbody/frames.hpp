#pragma once

#include "curvedbody/geometry.hpp"

#include <functional>
#include <string>

namespace cb {

/// Field of reference frames E_A on a chart. Column A of legs(x) holds the
/// components E^i_A; row A of coframe(x) holds E^A_i.
struct FrameField {
  std::string name;
  bool orthonormal = true;
  std::function<MatX(const VecX&)> legs;
  std::function<MatX(const VecX&)> coframe_fn;
  /// Optional closed-form ∂_k E^i_A (entry k), used instead of finite differences.
  std::function<std::vector<MatX>(const VecX&)> legs_derivative;

  MatX legs_at(const VecX& x) const { return legs(x); }
  MatX coframe_at(const VecX& x) const;
};

enum class Handedness { Left, Right };

/// Normalized coordinate frames on the 2D charts, Cartesian frames on flat
/// charts and the invariant frames ˡE(R), ʳE(R) on sphere3.
FrameField builtin_frame(const Chart& chart, Handedness side = Handedness::Left);

/// Gram–Schmidt orthonormalization of the coordinate basis (any chart).
FrameField gram_schmidt_frame(const Chart& chart);

/// FD derivatives of the legs: entry k holds ∂_k E^i_A.
std::vector<MatX> frame_derivative(const FrameField& frame, const VecX& x);

/// Γ^A_BC with ∇_{E_C} E_B = Γ^A_BC E_A.
Tensor3d aholonomic_connection(const FrameField& frame, const Geometry& geometry, const VecX& x);

/// Drift matrix ω_E(A, B) = Γ^A_BC V̂^C for co-moving translational velocity V̂.
MatX drift_matrix(const Tensor3d& aholonomic, const VecX& v_hat);

struct TeleparallelObjects {
  Tensor3d gamma;    // Γ[E]^i_jk = E^i_A ∂_k E^A_j
  Tensor3d torsion;  // S[E]^i_jk
  Tensor3d omega;    // Ω^A_BC = ⟨E^A, [E_B, E_C]⟩
};

TeleparallelObjects teleparallel_objects(const FrameField& frame, const VecX& x);

/// Ω^A_BC from the coframe exterior derivative, independent of the Lie bracket path.
Tensor3d schouten_from_coframe(const FrameField& frame, const VecX& x);

/// max |∂_k E^i_A + Γ[E]^i_jk E^j_A|.
double teleparallel_parallelism_residual(const FrameField& frame, const VecX& x);

enum class BodyMode { Affine, Gyroscopic };

struct InternalConfiguration {
  VecX base_point;
  MatX phi;
  BodyMode mode = BodyMode::Affine;
};

/// Checks the mode invariants (orthogonality or positive determinant).
void check_configuration(const InternalConfiguration& config, double tol = 1e-10);

struct CoMovingVelocity {
  MatX omega_hat;  // Ω̂ = Ω̂_dr + Ω̂_rl
  MatX drift;      // Ω̂_dr = φ⁻¹ ω_E φ
  MatX relative;   // Ω̂_rl = φ⁻¹ φ̇
  VecX v_hat;      // V̂^A = E^A_i V^i
  MatX spatial;    // Ω^i_j = e^i_A Ω̂^A_B e^B_j
  MatX omega_E;    // ω_E in reference-frame components
};

CoMovingVelocity comoving_velocity(const InternalConfiguration& config, const VecX& base_velocity,
                                   const MatX& phi_dot, const FrameField& frame, const Geometry& geometry);

struct DeformationTensors {
  MatX green;          // G[e]_AB = g_ij e^i_A e^j_B
  MatX cauchy;         // C[e]_ij = δ_AB e^A_i e^B_j
  MatX lagrange;       // ℰ = (G − δ)/2
  MatX euler;          // ε = (g − C)/2
  VecX invariants;     // deformation invariants, descending
  double x = 0, y = 0; // n = 2: x = (λ − μ)/√2, y = (λ + μ)/√2
  double rho = 0, eps_angle = 0;  // x = ϱ sin ε, y = ϱ cos ε
};

DeformationTensors deformation_tensors(const InternalConfiguration& config, const MatX& metric,
                                       const MatX& frame_legs);

struct PolarDecomposition {
  MatX U, A, B;  // φ = U A = B U
};

struct TwoPolarDecomposition {
  MatX L, D, Rm;  // φ = L D Rm⁻¹
  bool degenerate = false;
};

PolarDecomposition polar(const MatX& phi);
TwoPolarDecomposition two_polar(const MatX& phi);

struct PolarRates {
  MatX U_dot, A_dot;
};
PolarRates polar_rates(const PolarDecomposition& pd, const MatX& phi_dot);

struct TwoPolarRates {
  MatX L_dot, D_dot, Rm_dot;
};
/// Requires distinct invariants.
TwoPolarRates two_polar_rates(const TwoPolarDecomposition& tp, const MatX& phi_dot);

/// Closest matrix with orthonormal columns (polar retraction).
MatX orthogonal_retraction(const MatX& phi);

MatX rotation2(double angle);

}  // namespace cb
