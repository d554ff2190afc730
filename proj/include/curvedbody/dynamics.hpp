#pragma once

#include "curvedbody/frames.hpp"
#include "curvedbody/geometry.hpp"
#include "curvedbody/su2.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace cb {

enum class ScenarioKind {
  SphereGyro,
  SphereAffineXY,
  SphereAffinePolar,
  PseudosphereGyro,
  PseudosphereGyroLorentz,
  PseudosphereAffine,
  TorusGyro,
  TorusAffine,
  S3Gyro,
  Generic,
};

enum class Signature { Riemannian, LorentzType };

const char* to_string(ScenarioKind kind);
ScenarioKind scenario_from_name(const std::string& name);
std::vector<std::string> scenario_names();

struct InertiaSpec {
  double m = 1.0;
  // Gyroscopes: rotator inertia I = Tr J. Affine bodies: J = I·δ.
  double I = 1.0;
  // Generic scenario: full J^AB (empty means I·δ).
  MatX J;

  void validate() const;
};

/// Body state in frame-bundle terms: base point, velocity, φ and φ̇.
struct BodyKinematics {
  VecX x, v;
  MatX phi, phi_dot;
};

/// Two-polar data read directly from affine scenario coordinates.
struct TwoPolarKinematics {
  MatX L, D, Rm, L_dot, D_dot, Rm_dot;
};

/// Configuration space of a body on a chart with its block kinetic metric
/// T = (m/2) q̇ᵀ G(q) q̇.
class Scenario {
 public:
  Scenario(ScenarioKind kind, double R, double L, InertiaSpec inertia);
  /// Affine body with φ stored column-major after the base coordinates.
  static Scenario generic(Geometry geometry, FrameField frame, InertiaSpec inertia);

  ScenarioKind kind() const { return kind_; }
  int dim() const { return dim_; }
  Signature signature() const { return signature_; }
  const std::vector<std::string>& coordinate_names() const { return names_; }
  const std::vector<int>& cyclic() const { return cyclic_; }
  const InertiaSpec& inertia() const { return inertia_; }
  double R() const { return R_; }
  double L() const { return L_; }
  bool is_affine() const;
  bool is_gyro() const { return !is_affine(); }

  const Geometry& geometry() const { return geometry_; }
  const FrameField& frame() const { return frame_; }
  /// Internal inertia tensor J^AB used on the co-moving path.
  MatX internal_inertia() const;

  /// Throws SingularPoint if q leaves the admissible domain.
  void check(const VecX& q) const;

  MatX G(const VecX& q) const;
  MatX G_inv(const VecX& q) const;
  /// ∂G/∂q^k for each k.
  std::vector<MatX> G_derivative(const VecX& q) const;
  double vol_density(const VecX& q) const;

  BodyKinematics body_kinematics(const VecX& q, const VecX& qdot) const;
  std::optional<TwoPolarKinematics> two_polar_kinematics(const VecX& q, const VecX& qdot) const;

  /// Width w(u) and drift coefficient c(u) of the 2D base of the built-in scenarios.
  double width(double u) const;
  double drift_coefficient(double u) const;
  /// Coefficient of (du)² in the base metric (R² for the torus, 1 otherwise).
  double base_radial_metric() const;

 private:
  ScenarioKind kind_;
  double R_ = 1, L_ = 0;
  InertiaSpec inertia_;
  int dim_ = 0;
  Signature signature_ = Signature::Riemannian;
  std::vector<std::string> names_;
  std::vector<int> cyclic_;
  Geometry geometry_;
  FrameField frame_;
};

double kinetic_energy(const Scenario& s, const VecX& q, const VecX& qdot);

/// Co-moving kinetic energy m/2 g(v,v) + ½ Tr(Wᵀ η W J), W = ω_E φ + φ̇, η = Eᵀ g E.
double comoving_kinetic(const BodyKinematics& b, double m, const MatX& J, const FrameField& frame,
                        const Geometry& geometry);

/// Internal kinetic energy from the polar decomposition φ = U A:
/// −½Tr(AJAω̂²) + Tr(AJȦω̂) + ½Tr(JȦ²) with ω̂ = Uᵀ ω_E U + Uᵀ U̇.
double polar_internal_kinetic(const MatX& U, const MatX& A, const MatX& U_dot, const MatX& A_dot,
                              const MatX& omega_E, const MatX& J);

/// Internal kinetic energy from φ = L D Rm⁻¹ for isotropic J = I·δ:
/// (I/2)[Tr(Ḋ²) − Tr(χ̂²D²) − Tr(ϑ̂²D²) + 2Tr(χ̂Dϑ̂D)], χ̂ = Lᵀω_E L + LᵀL̇, ϑ̂ = RmᵀṘm.
double two_polar_internal_kinetic(const TwoPolarKinematics& tp, const MatX& omega_E, double I);

/// Drift matrix ω_E at the body state.
MatX body_drift(const BodyKinematics& b, const FrameField& frame, const Geometry& geometry);

VecX legendre(const Scenario& s, const VecX& q, const VecX& qdot);
VecX legendre_inverse(const Scenario& s, const VecX& q, const VecX& p);

enum class PotentialKind {
  Zero,
  SphereOscillator,
  SphereKepler,
  PseudoOscillator,
  PseudoKepler,
  CosPoly,
  CosPolyCentrifugal,
  ControlTanCubed,
  SeparableRXY,
  SeparablePolar,
  Canonical2DElastic,
  CustomTabulated,
};

const char* to_string(PotentialKind kind);
PotentialKind potential_from_name(const std::string& name);
std::vector<std::string> potential_names();

/// Monotone cubic (PCHIP) interpolant of a tabulated V(u).
class TabulatedCurve {
 public:
  TabulatedCurve(std::vector<double> u, std::vector<double> v);
  double value(double u) const;
  double derivative(double u) const;
  double lower() const { return lo_; }
  double upper() const { return hi_; }

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
  double lo_ = 0, hi_ = 0;
};

struct PotentialSpec {
  PotentialKind kind = PotentialKind::Zero;
  double kappa = 0;      // oscillator / elastic strength
  double alpha = 0;      // Kepler strength
  double alpha_hat = 0;  // cos² coefficient
  double beta_hat = 0;   // cos coefficient
  // Separable kinds: V_r of kind `radial`, V_x = kx x²/2, V_y = ky y²/2,
  // V_ϱ = krho ϱ²/2, V_ε = 2 keps / cos 2ε.
  PotentialKind radial = PotentialKind::Zero;
  double kx = 0, ky = 0, krho = 0, keps = 0;
  std::vector<double> table_u, table_v;
  std::shared_ptr<const TabulatedCurve> table;
};

/// Builds the interpolant of a custom tabulated potential (no-op for other kinds).
void prepare_potential(PotentialSpec& v);
/// Throws ValidationError if the potential kind does not fit the scenario.
void check_potential_compatible(const PotentialSpec& v, const Scenario& s);

/// V(u) and dV/du for kinds that depend on the base radial coordinate only.
/// The angle entering cos-type kinds is u/R on the sphere and u on the torus.
double radial_potential(const PotentialSpec& v, const Scenario& s, double u);
double radial_potential_derivative(const PotentialSpec& v, const Scenario& s, double u);
bool is_radial(PotentialKind kind);

double potential(const PotentialSpec& v, const Scenario& s, const VecX& q);
VecX potential_gradient(const PotentialSpec& v, const Scenario& s, const VecX& q);

class HamiltonianSystem {
 public:
  HamiltonianSystem(Scenario scenario, PotentialSpec potential);

  const Scenario& scenario() const { return scenario_; }
  const PotentialSpec& potential_spec() const { return potential_; }
  int dim() const { return scenario_.dim(); }

  double hamiltonian(const VecX& q, const VecX& p) const;
  /// Canonical vector field (dq/dt, dp/dt) from {·, H}.
  VecX rhs(const VecX& z) const;
  /// Characteristic time 2π·max(R√(m/max(E,1)), √(I/max(E,1))).
  double characteristic_time(double E) const;

 private:
  Scenario scenario_;
  PotentialSpec potential_;
};

double hamiltonian(const Scenario& s, const VecX& q, const VecX& p, const PotentialSpec& v);

/// ˡS(R) = A_R^{-T} p_r̄ and ˡS_rl = A(ϰ̄)^{-T} p_ϰ̄ for the s3_gyro scenario.
su2::MomentumPair s3_momenta(const Scenario& s, const VecX& q, const VecX& p);

enum class Method { RK4, ImplicitMidpoint };
const char* to_string(Method m);
Method method_from_name(const std::string& name);

struct IntegratorOptions {
  Method method = Method::ImplicitMidpoint;
  double dt = 1e-3;
  long steps = 1000;
  long output_every = 1;
  double newton_tol = 1e-15;
  int max_iterations = 100;
  /// 1: plain implicit midpoint. 3: symmetric triple-jump composition of
  /// implicit-midpoint substeps (fourth order, still symplectic).
  int composition = 1;
};

struct ConservationEntry {
  std::string quantity;
  double initial = 0;
  double final = 0;
  double max_rel_drift = 0;
};

struct Trajectory {
  std::vector<double> t;
  std::vector<VecX> q, p;
  std::vector<double> E;
  std::vector<ConservationEntry> conservation;
  double max_rel_energy_drift = 0;
  double max_abs_cyclic_drift = 0;
  double max_constraint_residual = 0;
  long steps_taken = 0;
  long fixed_point_iterations = 0;
  bool stopped_at_singularity = false;
  std::string stop_reason;
};

/// Single step of the chosen one-step method on z = (q, p).
VecX step(const HamiltonianSystem& sys, const VecX& z, double dt, const IntegratorOptions& opt,
          int* iterations = nullptr);

Trajectory integrate(const HamiltonianSystem& sys, const VecX& q0, const VecX& p0, const IntegratorOptions& opt);

// ---------------------------------------------------------------------------
// Balance form in orthonormal reference-frame components.

enum class ConstraintMode { None, Gyroscopic, Incompressible, Dilatational, Rotationless };
const char* to_string(ConstraintMode m);

/// Force callback: returns the co-moving translational force F̂^A given (x, φ).
using BalanceForce = std::function<VecX(const VecX& x, const MatX& phi)>;
/// Torque callback: internal force N̂^AB given (x, φ).
using BalanceTorque = std::function<MatX(const VecX& x, const MatX& phi)>;
using BalancePotential = std::function<double(const VecX& x, const MatX& phi)>;

struct BalanceBody {
  double m = 1;
  MatX J;  // J^AB
  ConstraintMode mode = ConstraintMode::Gyroscopic;
};

struct BalanceState {
  VecX x;
  VecX v_hat;  // V̂^A
  MatX phi;    // φ^A_B
  MatX omega;  // spatial affine velocity Ω^A_B in reference-frame components
};

struct BalanceRates {
  VecX dx, dv_hat;
  MatX dphi, domega;
  VecX F_curv, F_tors;  // geometric forces in V̂ components
};

struct BalanceSystem {
  Geometry geometry;
  FrameField frame;
  BalanceBody body;
  BalanceForce force;
  BalanceTorque torque;
  BalancePotential potential;
};

/// K̂^AB = φ J Wᵀ with W = Ω φ; spin Ŝ = K̂ − K̂ᵀ.
MatX kinematical_affine_spin(const BalanceState& s, const BalanceBody& b);
MatX spin(const BalanceState& s, const BalanceBody& b);
/// Ω solving J[e]Ω + ΩJ[e] = −Ŝ for skew Ω, J[e] = φJφᵀ.
MatX omega_from_spin(const MatX& spin, const MatX& phi, const MatX& J);

/// Intersection of several constraints; throws IncompatibleMode when only Ω = 0 survives.
ConstraintMode combine_constraints(const std::vector<ConstraintMode>& modes);

/// Projection onto the allowed subspace of Ω: skew, traceless, trace or symmetric part.
MatX project_velocity(const MatX& m, ConstraintMode mode);

/// Solves P(X J[e]) = P(rhs) for X in the allowed subspace P. This is the
/// constrained balance law with the reaction in the orthogonal complement.
MatX constraint_project(const MatX& rhs, ConstraintMode mode, const MatX& Je);

BalanceRates balance_rhs(const BalanceSystem& sys, const BalanceState& s);
/// Algebraic constraint enforcement after a step.
void enforce_constraint(BalanceState& s, ConstraintMode mode);
BalanceState balance_rk4_step(const BalanceSystem& sys, const BalanceState& s, double dt);
double balance_energy(const BalanceSystem& sys, const BalanceState& s);
/// g_ab V^a F^b_geom in orthonormal components.
double geometric_power(const BalanceSystem& sys, const BalanceState& s);

}  // namespace cb
