#pragma once

#include "curvedbody/types.hpp"

#include <Eigen/Geometry>

#include <complex>
#include <vector>

namespace cb::su2 {

using Quat = Eigen::Quaterniond;
using Mat2c = Eigen::Matrix2cd;

// Group elements are unit quaternions; u = I cos(k/2) − iσ·n sin(k/2) maps to
// (cos(k/2), n sin(k/2)) because −iσ_1, −iσ_2, −iσ_3 multiply like i, j, k.
Quat exp_su2_quat(const Vec3& k);
Mat2c to_matrix(const Quat& u);
Quat from_matrix(const Mat2c& u);
Mat2c exp_su2(const Vec3& k);
Mat3 exp_so3(const Vec3& k);
Mat3 project_su2_to_so3(const Quat& u);
Mat3 project_su2_to_so3(const Mat2c& u);

// A(k̄) = (sin k/k) I + (1 − sin k/k) n nᵀ + ((1 − cos k)/k²) k̂. Components of
// the coframe ˡE^A_i at unit scale; A(k̄) k̄̇ is the spatial angular velocity.
Mat3 coframe_matrix(const Vec3& k);

// Radius-R frames in the coordinates r̄ = R k̄/2. Columns of the leg matrices
// hold the vector fields, rows of the coframe matrices hold the covectors.
Mat3 left_coframe(double R, const Vec3& r);
Mat3 right_coframe(double R, const Vec3& r);
Mat3 left_legs(double R, const Vec3& r);
Mat3 right_legs(double R, const Vec3& r);
// Generators of inner automorphisms D_A = ε_AB^C r^B ∂_C (column A).
Mat3 inner_generators(const Vec3& r);

// Closed form dr² + R² sin²(r/R) dn̄·dn̄ in the r̄ coordinates.
Mat3 s3_metric(double R, const Vec3& r);
// Pull-back of the Euclidean metric of ℝ⁴ through x⁴ = R cos(r/R), x^A = R sin(r/R) n^A.
Mat3 s3_metric_embedding(double R, const Vec3& r);
Eigen::Vector4d s3_embedding(double R, const Vec3& r);

struct S3MetricReport {
  double left_vs_right = 0;
  double left_vs_closed_form = 0;
  double embedding_vs_closed_form = 0;
  int samples = 0;
};
S3MetricReport s3_metric_check(double R, int samples, unsigned seed);

struct MomentumPair {
  Vec3 S = Vec3::Zero();    // drive angular momentum ˡS(R)
  Vec3 Srl = Vec3::Zero();  // relative angular momentum ˡS_rl
};

struct OmegaPair {
  Vec3 Omega = Vec3::Zero();     // ˡΩ(R)
  Vec3 Omega_rl = Vec3::Zero();  // ˡΩ_rl
};

struct BodyParams {
  double m = 1;
  double I = 1;
  double R = 1;
};

void validate(const BodyParams& p);
MomentumPair s3_legendre(const OmegaPair& w, const BodyParams& p);
OmegaPair s3_legendre_inverse(const MomentumPair& s, const BodyParams& p);
double kinetic_hamiltonian(const MomentumPair& s, const BodyParams& p);
// T = ½(m + I/R²)|Ω|² − (I/R) Ω·Ω_rl + ½ I |Ω_rl|²
double kinetic_energy(const OmegaPair& w, const BodyParams& p);

// Conserved quantities of the geodetic momentum flow.
struct FlowConstants {
  double S_norm = 0;
  double Srl_norm = 0;
  double dot = 0;
  Vec3 conserved = Vec3::Zero();  // (R/2) ˡS(R) + ˡS_rl
};
FlowConstants flow_constants(const MomentumPair& s, const BodyParams& p);

// interference scales the (1/mR) cross term of the Hamiltonian.
MomentumPair flow_rhs(const MomentumPair& s, const BodyParams& p, double interference = 1.0);

struct FlowSample {
  double t = 0;
  MomentumPair s;
  FlowConstants c;
};

struct FlowResult {
  std::vector<FlowSample> samples;
  double max_rel_drift_S_norm = 0;
  double max_rel_drift_Srl_norm = 0;
  double max_rel_drift_dot = 0;
  double max_rel_drift_conserved = 0;
  double max_angle_drift = 0;
  double max_normal_angle_drift = 0;
};

FlowResult momentum_flow(const MomentumPair& initial, const BodyParams& p, double dt, long steps,
                         long output_every = 1, double interference = 1.0);

}  // namespace cb::su2
