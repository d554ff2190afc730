#pragma once

#include "curvedbody/dynamics.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cb::action_angle {

using Integrand = std::function<double(double)>;

struct SearchInterval {
  double lo = 0;
  double hi = 0;
  bool periodic = false;  // hi − lo is one full turn
};

struct TurningPoints {
  double lo = 0;
  double hi = 0;
  bool rotating = false;  // periodic coordinate with no turning point
};

/// Classical region of p²(u) = integrand(u) inside the search interval.
/// Without a hint the region containing the deepest point of the well is taken.
TurningPoints turning_points(const Integrand& integrand, const SearchInterval& interval,
                             std::optional<double> hint = {});

/// J = 2∫√p² du between turning points (∫ over one turn for a rotating coordinate).
double action_integral(const Integrand& integrand, const TurningPoints& tp);

/// Libration or rotation of a periodic coordinate. Both can carry the same
/// action value, so inverting E(J) on a periodic stage needs the branch.
enum class Branch { Auto, Libration, Rotation };

/// One separation stage p²(u) = a(u)·C − b(u), linear in its separation constant C.
struct Stage {
  std::string name;
  std::function<double(double)> a, b;
  SearchInterval interval;

  Integrand at(double C) const;
  /// Lowest C with a classical region (the bottom of the effective well) and where it sits.
  double minimum_level(double* where = nullptr) const;
  /// For periodic coordinates: the level above which the motion rotates.
  double separatrix_level() const;
  double action(double C) const;
  bool rotating(double C) const;
  /// Inverts action(C) = J. Auto prefers libration and falls back to rotation on periodic stages.
  double level_for_action(double J, Branch branch = Branch::Auto) const;
};

/// Residue formula for the spherical gyroscope with I = mR² and the optional
/// potential V = (α̂ cos²ϑ + β̂ cos ϑ)/sin²ϑ, ϑ = r/R:
/// 4π√(2I(E + α̂)) = 2J_ϑ + √((J_φ−J_ψ)² + 8π²I(α̂+β̂)) + √((J_φ+J_ψ)² + 8π²I(α̂−β̂)).
struct ClosedForm {
  double J_theta = 0;
  std::string region;
};

/// Region (i)–(iv) of the (J_φ, J_ψ) plane; "boundary" when J_φ = ±J_ψ.
std::string region_label(double J_phi, double J_psi);
ClosedForm spherical_gyro_closed_form(double E, double J_phi, double J_psi, double I, double alpha_hat = 0,
                                      double beta_hat = 0);
double spherical_gyro_closed_form_energy(double J_theta, double J_phi, double J_psi, double I,
                                         double alpha_hat = 0, double beta_hat = 0);

enum class Chain { Gyro, AffineXY, AffinePolar };

/// Momenta of the cyclic coordinates: ℓ = p_φ, s = p_γ + p_δ, j = p_γ − p_δ
/// (for gyroscopes s = p_ψ and j is unused).
struct CyclicConstants {
  double ell = 0, s = 0, j = 0;
  double p_gamma() const { return 0.5 * (s + j); }
  double p_delta() const { return 0.5 * (s - j); }
};

/// Energy and the stage constants: (C_x, C_y) on the (x, y) chain, (A, C) on the (ϱ, ε) chain.
struct StageConstants {
  double E = 0;
  double c1 = 0, c2 = 0;
};

struct ActionSpectrum {
  std::vector<std::string> names;
  VecX J;
  CyclicConstants cyclic;
  StageConstants stages;
  double E = 0;
  Branch radial_branch = Branch::Libration;
};

/// Hamilton–Jacobi separation of a built-in two-dimensional scenario.
class SeparableSpec {
 public:
  SeparableSpec(Scenario scenario, PotentialSpec potential, bool allow_unbounded = false);

  const Scenario& scenario() const { return scenario_; }
  const PotentialSpec& potential() const { return potential_; }
  Chain chain() const { return chain_; }
  /// Actions in coordinate order: (J_r, J_φ, J_ψ) or (J_r, J_φ, J_α, J_β, J_x|J_ϱ, J_y|J_ε).
  std::vector<std::string> action_names() const;

  Stage radial_stage(const CyclicConstants& c) const;
  Stage x_stage(double p_gamma) const;
  Stage y_stage(double p_delta) const;
  Stage eps_stage(double p_gamma, double p_delta) const;
  Stage rho_stage(double A) const;

  /// Radial energy E − C_x − C_y or E − C.
  double radial_level(const StageConstants& k) const;

  std::pair<CyclicConstants, StageConstants> constants(const VecX& q, const VecX& p) const;
  VecX actions(const CyclicConstants& c, const StageConstants& k) const;
  ActionSpectrum spectrum(const VecX& q, const VecX& p) const;
  /// Solves E = H(J) stage by stage in the elimination order of the chain.
  ActionSpectrum invert_energy(const VecX& J, Branch radial = Branch::Auto) const;
  double energy(const VecX& J, Branch radial = Branch::Auto) const { return invert_energy(J, radial).E; }

  CyclicConstants cyclic_from_actions(const VecX& J) const;

  /// Phase point on the torus with the given constants, at the inner turning
  /// point of every librating stage and angle coordinates zero.
  std::pair<VecX, VecX> state_on_torus(const CyclicConstants& c, const StageConstants& k) const;

 private:
  Scenario scenario_;
  PotentialSpec potential_;
  PotentialSpec radial_;
  Chain chain_;
  double kx_ = 0, ky_ = 0, krho_ = 0, keps_ = 0;
};

struct IntegerRelation {
  std::vector<int> n;
  double residual = 0;
  bool accidental = false;
};

struct DegeneracyReport {
  std::vector<std::string> names;
  VecX nu, omega;
  std::vector<IntegerRelation> relations;
  /// Rank of the non-accidental relations.
  int degeneracy = 0;
};

/// ν_i = ∂E/∂J_i by central differences, then an exhaustive search of integer
/// relations n·ν = 0 with |n_i| ≤ n_max.
DegeneracyReport frequencies_and_degeneracy(const SeparableSpec& spec, const VecX& J, int n_max = 8,
                                            double tolerance = 1e-4, Branch radial = Branch::Auto);
VecX frequencies(const SeparableSpec& spec, const VecX& J, double relative_step = 1e-5,
                 Branch radial = Branch::Auto);

/// Direct integration of one radial period starting at a turning point.
struct RadialOrbit {
  double period = 0;
  VecX delta_q;
  double loop_action = 0;  // ∮ p_r dr along the trajectory
  double rel_energy_drift = 0;
};
RadialOrbit integrate_radial_period(const HamiltonianSystem& sys, const VecX& q0, const VecX& p0,
                                    double period_guess, int steps_per_period = 20000);

struct BertrandSample {
  double E = 0, ell = 0;
  double ratio = 0;  // Δφ / 2π over one radial period
  int p = 0, q = 0;  // nearest rational with q ≤ 4
  double distance = 0;
  bool closed = false;
};

struct BertrandReport {
  std::string chart, potential;
  bool bertrand = true;  // false for the control potential
  std::vector<BertrandSample> samples;
  int closed = 0;
  /// Unbounded-motion check above the pseudosphere threshold (empty when not applicable).
  std::string threshold_check;
  bool threshold_ok = true;
  bool pass() const;
};

/// Orbit-closure test for the sphere/pseudosphere oscillator and Kepler potentials
/// (and ControlTanCubed on the sphere as a negative control).
BertrandReport bertrand_closure(ChartKind chart, PotentialKind potential, int samples, unsigned seed,
                                double R = 1.0, double strength = 1.0, int threads = 1);

/// Nearest fraction p/q to x with 1 ≤ q ≤ q_max.
std::pair<int, int> nearest_rational(double x, int q_max, double* distance);

}  // namespace cb::action_angle
