#include "curvedbody/su2.hpp"

#include "curvedbody/geometry.hpp"
#include "curvedbody/numdiff.hpp"
#include "curvedbody/special.hpp"

#include <boost/numeric/odeint.hpp>

#include <cmath>
#include <numbers>
#include <random>

namespace cb::su2 {

Quat exp_su2_quat(const Vec3& k) {
  const double half = 0.5 * k.norm();
  const Vec3 v = 0.5 * special::sinc(half) * k;
  return Quat(std::cos(half), v.x(), v.y(), v.z());
}

Mat2c to_matrix(const Quat& u) {
  using C = std::complex<double>;
  Mat2c m;
  m << C(u.w(), -u.z()), C(-u.y(), -u.x()), C(u.y(), -u.x()), C(u.w(), u.z());
  return m;
}

Quat from_matrix(const Mat2c& u) {
  return Quat(u(0, 0).real(), -u(0, 1).imag(), -u(0, 1).real(), -u(0, 0).imag());
}

Mat2c exp_su2(const Vec3& k) { return to_matrix(exp_su2_quat(k)); }

Mat3 exp_so3(const Vec3& k) {
  const double a = k.norm();
  return std::cos(a) * Mat3::Identity() + special::versc2(a) * k * k.transpose() + special::sinc(a) * hat(k);
}

Mat3 project_su2_to_so3(const Quat& u) { return u.normalized().toRotationMatrix(); }

Mat3 project_su2_to_so3(const Mat2c& u) { return project_su2_to_so3(from_matrix(u)); }

Mat3 coframe_matrix(const Vec3& k) {
  const double a = k.norm();
  return special::sinc(a) * Mat3::Identity() + special::sinc_defect3(a) * k * k.transpose() +
         special::versc2(a) * hat(k);
}

Mat3 left_coframe(double R, const Vec3& r) { return coframe_matrix(2.0 * r / R); }

Mat3 right_coframe(double R, const Vec3& r) { return coframe_matrix(-2.0 * r / R); }

Mat3 left_legs(double R, const Vec3& r) { return left_coframe(R, r).inverse(); }

Mat3 right_legs(double R, const Vec3& r) { return right_coframe(R, r).inverse(); }

Mat3 inner_generators(const Vec3& r) {
  Mat3 d;
  for (int a = 0; a < 3; ++a)
    for (int c = 0; c < 3; ++c) {
      double v = 0;
      for (int b = 0; b < 3; ++b) v += epsilon3(a, b, c) * r(b);
      d(c, a) = v;
    }
  return d;
}

Mat3 s3_metric(double R, const Vec3& r) { return metric_at(sphere3(R), r); }

Eigen::Vector4d s3_embedding(double R, const Vec3& r) {
  const double rho = r.norm();
  const double x = rho / R;
  Eigen::Vector4d X;
  X.head<3>() = special::sinc(x) * r;
  X(3) = R * std::cos(x);
  return X;
}

Mat3 s3_metric_embedding(double R, const Vec3& r) {
  Eigen::Matrix<double, 4, 3> J;
  for (int k = 0; k < 3; ++k) {
    VecX x = r;
    J.col(k) = numdiff::partial(
        [R](const VecX& y) -> Eigen::Vector4d { return s3_embedding(R, Vec3(y)); }, x, k,
        numdiff::Step::Quint);
  }
  return J.transpose() * J;
}

S3MetricReport s3_metric_check(double R, int samples, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> radius(0.02, 0.95);
  S3MetricReport rep;
  rep.samples = samples;
  for (int s = 0; s < samples; ++s) {
    Vec3 dir(unit(rng), unit(rng), unit(rng));
    while (dir.norm() < 1e-3) dir = Vec3(unit(rng), unit(rng), unit(rng));
    const Vec3 r = dir.normalized() * radius(rng) * std::numbers::pi * R;
    const Mat3 A = left_coframe(R, r);
    const Mat3 B = right_coframe(R, r);
    const Mat3 gl = A.transpose() * A;
    const Mat3 gr = B.transpose() * B;
    const Mat3 gc = s3_metric(R, r);
    const Mat3 ge = s3_metric_embedding(R, r);
    rep.left_vs_right = std::max(rep.left_vs_right, (gl - gr).cwiseAbs().maxCoeff());
    rep.left_vs_closed_form = std::max(rep.left_vs_closed_form, (gl - gc).cwiseAbs().maxCoeff());
    rep.embedding_vs_closed_form = std::max(rep.embedding_vs_closed_form, (ge - gc).cwiseAbs().maxCoeff());
  }
  return rep;
}

void validate(const BodyParams& p) {
  if (!(p.m > 0) || !(p.I > 0) || !(p.R > 0)) throw Error(ErrorKind::BadParams, "m, I and R must be positive");
}

MomentumPair s3_legendre(const OmegaPair& w, const BodyParams& p) {
  validate(p);
  MomentumPair s;
  s.S = (p.m + p.I / (p.R * p.R)) * w.Omega - (p.I / p.R) * w.Omega_rl;
  s.Srl = -(p.I / p.R) * w.Omega + p.I * w.Omega_rl;
  return s;
}

OmegaPair s3_legendre_inverse(const MomentumPair& s, const BodyParams& p) {
  validate(p);
  OmegaPair w;
  w.Omega = s.S / p.m + s.Srl / (p.m * p.R);
  w.Omega_rl = s.S / (p.m * p.R) + ((p.I + p.m * p.R * p.R) / (p.I * p.m * p.R * p.R)) * s.Srl;
  return w;
}

double kinetic_hamiltonian(const MomentumPair& s, const BodyParams& p) {
  validate(p);
  return s.S.squaredNorm() / (2 * p.m) + s.S.dot(s.Srl) / (p.m * p.R) +
         ((p.I + p.m * p.R * p.R) / (2 * p.I * p.m * p.R * p.R)) * s.Srl.squaredNorm();
}

double kinetic_energy(const OmegaPair& w, const BodyParams& p) {
  validate(p);
  return 0.5 * (p.m + p.I / (p.R * p.R)) * w.Omega.squaredNorm() - (p.I / p.R) * w.Omega.dot(w.Omega_rl) +
         0.5 * p.I * w.Omega_rl.squaredNorm();
}

FlowConstants flow_constants(const MomentumPair& s, const BodyParams& p) {
  FlowConstants c;
  c.S_norm = s.S.norm();
  c.Srl_norm = s.Srl.norm();
  c.dot = s.S.dot(s.Srl);
  c.conserved = 0.5 * p.R * s.S + s.Srl;
  return c;
}

MomentumPair flow_rhs(const MomentumPair& s, const BodyParams& p, double interference) {
  MomentumPair d;
  d.S = interference * (2.0 / (p.m * p.R * p.R)) * s.Srl.cross(s.S);
  d.Srl = interference * (1.0 / (p.m * p.R)) * s.S.cross(s.Srl);
  return d;
}

namespace {

double angle_between(const Vec3& a, const Vec3& b) { return std::atan2(a.cross(b).norm(), a.dot(b)); }

double rel(double v, double ref) { return std::abs(v - ref) / std::max(std::abs(ref), 1e-300); }

}  // namespace

FlowResult momentum_flow(const MomentumPair& initial, const BodyParams& p, double dt, long steps,
                         long output_every, double interference) {
  validate(p);
  using State = Eigen::Matrix<double, 6, 1>;
  namespace ode = boost::numeric::odeint;
  ode::runge_kutta4<State, double, State, double, ode::vector_space_algebra> stepper;
  auto rhs = [&](const State& z, State& dz, double) {
    MomentumPair s{z.head<3>(), z.tail<3>()};
    const MomentumPair d = flow_rhs(s, p, interference);
    dz.head<3>() = d.S;
    dz.tail<3>() = d.Srl;
  };

  State z;
  z << initial.S, initial.Srl;
  const FlowConstants c0 = flow_constants(initial, p);
  const double angle0 = angle_between(initial.S, initial.Srl);
  const Vec3 normal0 = initial.S.cross(initial.Srl);
  const bool has_plane = normal0.norm() > 1e-12 * (1.0 + c0.S_norm * c0.Srl_norm) && c0.conserved.norm() > 0;
  const double nangle0 = has_plane ? angle_between(normal0, c0.conserved) : 0.0;
  const double dot_scale = std::max(c0.S_norm * c0.Srl_norm, 1e-300);

  FlowResult out;
  out.samples.push_back({0.0, initial, c0});
  double t = 0;
  for (long n = 1; n <= steps; ++n) {
    stepper.do_step(rhs, z, t, dt);
    t = n * dt;
    MomentumPair s{z.head<3>(), z.tail<3>()};
    const FlowConstants c = flow_constants(s, p);
    out.max_rel_drift_S_norm = std::max(out.max_rel_drift_S_norm, rel(c.S_norm, c0.S_norm));
    out.max_rel_drift_Srl_norm = std::max(out.max_rel_drift_Srl_norm, rel(c.Srl_norm, c0.Srl_norm));
    out.max_rel_drift_dot = std::max(out.max_rel_drift_dot, std::abs(c.dot - c0.dot) / dot_scale);
    out.max_rel_drift_conserved =
        std::max(out.max_rel_drift_conserved,
                 (c.conserved - c0.conserved).norm() / std::max(c0.conserved.norm(), 1e-300));
    out.max_angle_drift = std::max(out.max_angle_drift, std::abs(angle_between(s.S, s.Srl) - angle0));
    if (has_plane)
      out.max_normal_angle_drift =
          std::max(out.max_normal_angle_drift, std::abs(angle_between(s.S.cross(s.Srl), c.conserved) - nangle0));
    if (output_every > 0 && n % output_every == 0) out.samples.push_back({t, s, c});
  }
  return out;
}

}  // namespace cb::su2
