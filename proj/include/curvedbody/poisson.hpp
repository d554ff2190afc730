#pragma once

#include "curvedbody/geometry.hpp"
#include "curvedbody/numdiff.hpp"

#include <functional>
#include <random>
#include <string>
#include <vector>

namespace cb::poisson {

/// Function on a canonical phase space z = (q, p) with dim q = dim p.
using PhaseFn = std::function<double(const VecX&)>;

struct PhaseFunction {
  std::string name;
  PhaseFn eval;
};

/// {f, g} = Σ_μ ∂f/∂q^μ ∂g/∂p_μ − ∂f/∂p_μ ∂g/∂q^μ by 4th-order central differences.
double numeric_bracket(const PhaseFn& f, const PhaseFn& g, const VecX& z, numdiff::Step step = numdiff::Step::Cbrt);

/// Phase point of the frame bundle: q = (x^i, e^i_A), p = (p_i, p^A_i).
/// Matrices are stored column-major: e(i, A) = e^i_A and pe(i, A) = p^A_i.
struct FrameBundlePoint {
  VecX x, p;
  MatX e, pe;
};

VecX pack(const FrameBundlePoint& s);
FrameBundlePoint unpack(const VecX& z, int n);

/// Built-in phase functions of the frame bundle over a geometry.
class FrameBundleFunctions {
 public:
  explicit FrameBundleFunctions(Geometry geometry);

  int n() const { return geometry_.dim(); }
  const Geometry& geometry() const { return geometry_; }

  PhaseFunction x(int i) const;
  PhaseFunction e(int i, int A) const;
  PhaseFunction p_canonical(int i) const;
  /// P_i = p_i − e^j_A p^A_k Γ^k_ji
  PhaseFunction P(int i) const;
  /// P^A_i = p^A_i
  PhaseFunction PA(int A, int i) const;
  /// Σ^i_j = e^i_A P^A_j
  PhaseFunction Sigma(int i, int j) const;
  /// Σ̂^A_B = P^A_i e^i_B
  PhaseFunction SigmaHat(int A, int B) const;
  /// P̂_A = P_i e^i_A
  PhaseFunction Phat(int A) const;

  std::vector<PhaseFunction> builtins() const;

  VecX P_all(const FrameBundlePoint& s) const;

 private:
  Geometry geometry_;
};

struct TableRow {
  std::string name;
  double max_error = 0;
  double tolerance = 0;
  long evaluations = 0;
  bool pass = true;
};

struct BracketReport {
  std::string chart;
  unsigned seed = 0;
  int samples = 0;
  std::vector<TableRow> rows;
  bool pass() const;
};

/// Frame-bundle state away from the singular loci of the chart, e near identity.
VecX sample_state(const Geometry& geometry, std::mt19937_64& rng);

/// Checks every row of the holonomic and co-moving bracket tables, the
/// defining relations of the built-ins, antisymmetry, Leibniz and Jacobi.
BracketReport verify_tables(const Geometry& geometry, int samples, unsigned seed, double tolerance = 1e-7,
                            int jacobi_triples = 50, double jacobi_tolerance = 1e-6, int threads = 1);

/// SU(2) momentum algebra on the s3_gyro phase space (r̄, ϰ̄; p_r̄, p_ϰ̄).
BracketReport verify_su2_tables(double R, int samples, unsigned seed, double tolerance = 1e-7, double m = 1.0,
                                double I = 1.0);

/// Flat ℝ³ with a position-dependent Riemann–Cartan connection (nonzero torsion and curvature).
Geometry torsion_test_geometry();

}  // namespace cb::poisson
