#include "curvedbody/dynamics.hpp"

#include "curvedbody/numdiff.hpp"
#include "curvedbody/su2.hpp"

#include <cmath>
// Boost 1.74 pchip.hpp calls isnan unqualified.
using std::isnan;
#include <boost/math/interpolators/pchip.hpp>
#include <boost/numeric/odeint.hpp>
#include <boost/numeric/odeint/external/eigen/eigen.hpp>

#include <numbers>

namespace cb {

namespace {

constexpr double kPi = std::numbers::pi;

struct NamedScenario {
  ScenarioKind kind;
  const char* name;
};

constexpr NamedScenario kScenarioNames[] = {
    {ScenarioKind::SphereGyro, "sphere_gyro"},
    {ScenarioKind::SphereAffineXY, "sphere_affine_xy"},
    {ScenarioKind::SphereAffinePolar, "sphere_affine_polar"},
    {ScenarioKind::PseudosphereGyro, "pseudosphere_gyro"},
    {ScenarioKind::PseudosphereGyroLorentz, "pseudosphere_gyro_lorentz"},
    {ScenarioKind::PseudosphereAffine, "pseudosphere_affine"},
    {ScenarioKind::TorusGyro, "torus_gyro"},
    {ScenarioKind::TorusAffine, "torus_affine"},
    {ScenarioKind::S3Gyro, "s3_gyro"},
    {ScenarioKind::Generic, "generic"},
};

struct NamedPotential {
  PotentialKind kind;
  const char* name;
};

constexpr NamedPotential kPotentialNames[] = {
    {PotentialKind::Zero, "zero"},
    {PotentialKind::SphereOscillator, "sphere_oscillator"},
    {PotentialKind::SphereKepler, "sphere_kepler"},
    {PotentialKind::PseudoOscillator, "pseudo_oscillator"},
    {PotentialKind::PseudoKepler, "pseudo_kepler"},
    {PotentialKind::CosPoly, "cos_poly"},
    {PotentialKind::CosPolyCentrifugal, "cos_poly_centrifugal"},
    {PotentialKind::ControlTanCubed, "control_tan3"},
    {PotentialKind::SeparableRXY, "separable_rxy"},
    {PotentialKind::SeparablePolar, "separable_polar"},
    {PotentialKind::Canonical2DElastic, "canonical_2d_elastic"},
    {PotentialKind::CustomTabulated, "custom_tabulated"},
};

bool is_2d_gyro(ScenarioKind k) {
  return k == ScenarioKind::SphereGyro || k == ScenarioKind::PseudosphereGyro ||
         k == ScenarioKind::PseudosphereGyroLorentz || k == ScenarioKind::TorusGyro;
}

bool is_xy(ScenarioKind k) {
  return k == ScenarioKind::SphereAffineXY || k == ScenarioKind::PseudosphereAffine ||
         k == ScenarioKind::TorusAffine;
}

bool is_sphere_base(ScenarioKind k) {
  return k == ScenarioKind::SphereGyro || k == ScenarioKind::SphereAffineXY || k == ScenarioKind::SphereAffinePolar;
}

bool is_pseudo_base(ScenarioKind k) {
  return k == ScenarioKind::PseudosphereGyro || k == ScenarioKind::PseudosphereGyroLorentz ||
         k == ScenarioKind::PseudosphereAffine;
}

bool is_torus_base(ScenarioKind k) { return k == ScenarioKind::TorusGyro || k == ScenarioKind::TorusAffine; }

Chart chart_for(ScenarioKind k, double R, double L) {
  if (is_sphere_base(k)) return sphere2(R);
  if (is_pseudo_base(k)) return pseudosphere2(R);
  if (is_torus_base(k)) return torus2(L, R);
  if (k == ScenarioKind::S3Gyro) return sphere3(R);
  throw Error(ErrorKind::BadParams, "generic scenarios are built with Scenario::generic");
}

MatX eps2() {
  MatX e(2, 2);
  e << 0, -1, 1, 0;
  return e;
}

// Internal two-polar invariants (λ, μ) and their rates from the xy or polar coordinates.
struct Invariants {
  double lam, mu, lam_dot, mu_dot;
};

Invariants invariants_of(ScenarioKind k, const VecX& q, const VecX& qd) {
  double x, y, xd, yd;
  if (k == ScenarioKind::SphereAffinePolar) {
    const double rho = q(4), e = q(5);
    x = rho * std::sin(e);
    y = rho * std::cos(e);
    xd = qd(4) * std::sin(e) + rho * std::cos(e) * qd(5);
    yd = qd(4) * std::cos(e) - rho * std::sin(e) * qd(5);
  } else {
    x = q(4);
    y = q(5);
    xd = qd(4);
    yd = qd(5);
  }
  const double s = 1.0 / std::sqrt(2.0);
  return {s * (x + y), s * (y - x), s * (xd + yd), s * (yd - xd)};
}

// Squared internal amplitudes x², y² and their gradients with respect to the last two coordinates.
struct Amplitudes {
  double x2, y2;
  Eigen::Vector2d dx2, dy2;
};

Amplitudes amplitudes_of(ScenarioKind k, const VecX& q) {
  Amplitudes a;
  if (k == ScenarioKind::SphereAffinePolar) {
    const double rho = q(4), e = q(5);
    const double s = std::sin(e), c = std::cos(e);
    a.x2 = rho * rho * s * s;
    a.y2 = rho * rho * c * c;
    a.dx2 << 2 * rho * s * s, 2 * rho * rho * s * c;
    a.dy2 << 2 * rho * c * c, -2 * rho * rho * s * c;
  } else {
    a.x2 = q(4) * q(4);
    a.y2 = q(5) * q(5);
    a.dx2 << 2 * q(4), 0;
    a.dy2 << 0, 2 * q(5);
  }
  return a;
}

MatX generic_phi(int n, const VecX& q) { return Eigen::Map<const MatX>(q.data() + n, n, n); }

// T = m/2 g(v,v) + ½Tr(Wᵀ η W J) with a precomputed aholonomic connection at the base point.
double comoving_kinetic_at(const Tensor3d& ahol, const MatX& g, const MatX& E, const MatX& Einv, double m,
                           const MatX& J, const VecX& v, const MatX& phi, const MatX& phi_dot) {
  const VecX v_hat = Einv * v;
  const MatX omega_E = drift_matrix(ahol, v_hat);
  const MatX W = omega_E * phi + phi_dot;
  const MatX eta = E.transpose() * g * E;
  return 0.5 * m * v.dot(g * v) + 0.5 * (W.transpose() * eta * W * J).trace();
}

}  // namespace

const char* to_string(ScenarioKind kind) {
  for (const auto& n : kScenarioNames)
    if (n.kind == kind) return n.name;
  return "unknown";
}

ScenarioKind scenario_from_name(const std::string& name) {
  for (const auto& n : kScenarioNames)
    if (name == n.name) return n.kind;
  throw Error(ErrorKind::ValidationError, "unknown scenario '" + name + "'");
}

std::vector<std::string> scenario_names() {
  std::vector<std::string> out;
  for (const auto& n : kScenarioNames) out.emplace_back(n.name);
  return out;
}

void InertiaSpec::validate() const {
  if (!(m > 0)) throw Error(ErrorKind::BadParams, "mass must be positive");
  if (J.size() == 0) {
    if (!(I > 0)) throw Error(ErrorKind::BadParams, "internal inertia must be positive");
    return;
  }
  if (J.rows() != J.cols()) throw Error(ErrorKind::DimensionMismatch, "J must be square");
  if ((J - J.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1 + J.cwiseAbs().maxCoeff()))
    throw Error(ErrorKind::BadParams, "J must be symmetric");
  Eigen::LLT<MatX> llt(J);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::BadParams, "J must be positive-definite");
}

Scenario::Scenario(ScenarioKind kind, double R, double L, InertiaSpec inertia)
    : kind_(kind), R_(R), L_(L), inertia_(std::move(inertia)), geometry_(chart_for(kind, R, L)),
      frame_(builtin_frame(geometry_.chart())) {
  inertia_.validate();
  if (is_2d_gyro(kind)) {
    dim_ = 3;
    names_ = {is_torus_base(kind) ? "theta" : "r", "phi", "psi"};
    cyclic_ = {1, 2};
  } else if (kind == ScenarioKind::SphereAffinePolar) {
    dim_ = 6;
    names_ = {"r", "phi", "gamma", "delta", "rho", "eps"};
    cyclic_ = {1, 2, 3};
  } else if (is_xy(kind)) {
    dim_ = 6;
    names_ = {is_torus_base(kind) ? "theta" : "r", "phi", "gamma", "delta", "x", "y"};
    cyclic_ = {1, 2, 3};
  } else if (kind == ScenarioKind::S3Gyro) {
    dim_ = 6;
    names_ = {"r1", "r2", "r3", "k1", "k2", "k3"};
  }
  if (kind == ScenarioKind::PseudosphereGyroLorentz) signature_ = Signature::LorentzType;
}

Scenario Scenario::generic(Geometry geometry, FrameField frame, InertiaSpec inertia) {
  Scenario s(ScenarioKind::SphereGyro, 1.0, 0.0, std::move(inertia));
  s.kind_ = ScenarioKind::Generic;
  const int n = geometry.dim();
  if (s.inertia_.J.size() != 0 && s.inertia_.J.rows() != n)
    throw Error(ErrorKind::DimensionMismatch, "J must be n x n for the generic scenario");
  s.R_ = geometry.chart().R;
  s.L_ = geometry.chart().L;
  s.dim_ = n + n * n;
  s.names_.clear();
  for (int i = 0; i < n; ++i) s.names_.push_back("x" + std::to_string(i + 1));
  for (int B = 0; B < n; ++B)
    for (int A = 0; A < n; ++A) s.names_.push_back("phi" + std::to_string(A + 1) + std::to_string(B + 1));
  s.cyclic_.clear();
  s.geometry_ = std::move(geometry);
  s.frame_ = std::move(frame);
  return s;
}

bool Scenario::is_affine() const {
  return is_xy(kind_) || kind_ == ScenarioKind::SphereAffinePolar || kind_ == ScenarioKind::Generic;
}

MatX Scenario::internal_inertia() const {
  const double I = inertia_.I;
  if (is_2d_gyro(kind_))
    return (signature_ == Signature::LorentzType ? -0.5 : 0.5) * I * MatX::Identity(2, 2);
  if (kind_ == ScenarioKind::S3Gyro) return 0.5 * I * MatX::Identity(3, 3);
  if (kind_ == ScenarioKind::Generic) {
    const int n = geometry_.dim();
    return inertia_.J.size() ? inertia_.J : MatX(I * MatX::Identity(n, n));
  }
  return I * MatX::Identity(2, 2);
}

double Scenario::width(double u) const {
  if (is_sphere_base(kind_)) return R_ * std::sin(u / R_);
  if (is_pseudo_base(kind_)) return R_ * std::sinh(u / R_);
  if (is_torus_base(kind_)) return L_ + R_ * std::cos(u);
  throw Error(ErrorKind::UnsupportedChart, "width is defined for 2D scenarios only");
}

double Scenario::drift_coefficient(double u) const {
  if (is_sphere_base(kind_)) return std::cos(u / R_);
  if (is_pseudo_base(kind_)) return std::cosh(u / R_);
  if (is_torus_base(kind_)) return -std::sin(u);
  throw Error(ErrorKind::UnsupportedChart, "drift coefficient is defined for 2D scenarios only");
}

double Scenario::base_radial_metric() const { return is_torus_base(kind_) ? R_ * R_ : 1.0; }

void Scenario::check(const VecX& q) const {
  if (q.size() != dim_) throw Error(ErrorKind::DimensionMismatch, "state has the wrong dimension");
  if (!q.allFinite()) throw Error(ErrorKind::SingularPoint, "non-finite coordinates");
  const Chart& c = geometry_.chart();
  if (kind_ == ScenarioKind::Generic) {
    const int n = c.dim;
    check_point(c, q.head(n));
    if (!(generic_phi(n, q).determinant() > 0)) throw Error(ErrorKind::SingularPhi, "det phi must stay positive");
    return;
  }
  if (kind_ == ScenarioKind::S3Gyro) {
    check_point(c, q.head(3));
    if (q.tail(3).norm() >= 2 * kPi - c.margin)
      throw Error(ErrorKind::SingularPoint, "internal rotation vector reached |k| = 2π");
    return;
  }
  check_point(c, q.head(2));
  if (kind_ == ScenarioKind::SphereAffinePolar) {
    const double rho = q(4), e = q(5);
    if (rho <= c.margin) throw Error(ErrorKind::SingularPoint, "rho must stay positive");
    if (std::abs(e) <= c.margin || std::abs(e) >= kPi / 4 - c.margin)
      throw Error(ErrorKind::SingularPoint, "eps must stay inside 0 < |eps| < π/4");
  } else if (is_xy(kind_)) {
    const double x = q(4), y = q(5);
    if (std::abs(x) <= c.margin || y <= std::abs(x) + c.margin)
      throw Error(ErrorKind::SingularPoint, "(x, y) must satisfy 0 < |x| < y");
  }
}

MatX Scenario::G(const VecX& q) const {
  check(q);
  const double k = inertia_.I / inertia_.m;
  if (is_2d_gyro(kind_)) {
    const double w = width(q(0)), c = drift_coefficient(q(0));
    const double sg = signature_ == Signature::LorentzType ? -1.0 : 1.0;
    MatX g = MatX::Zero(3, 3);
    g(0, 0) = base_radial_metric();
    g(1, 1) = w * w + sg * k * c * c;
    g(1, 2) = g(2, 1) = sg * k * c;
    g(2, 2) = sg * k;
    return g;
  }
  if (is_xy(kind_) || kind_ == ScenarioKind::SphereAffinePolar) {
    const double w = width(q(0)), c = drift_coefficient(q(0));
    const Amplitudes a = amplitudes_of(kind_, q);
    MatX g = MatX::Zero(6, 6);
    g(0, 0) = base_radial_metric();
    g(1, 1) = w * w + k * (a.x2 + a.y2) * c * c;
    g(1, 2) = g(2, 1) = k * a.x2 * c;
    g(1, 3) = g(3, 1) = k * a.y2 * c;
    g(2, 2) = k * a.x2;
    g(3, 3) = k * a.y2;
    if (kind_ == ScenarioKind::SphereAffinePolar) {
      g(4, 4) = k;
      g(5, 5) = k * q(4) * q(4);
    } else {
      g(4, 4) = g(5, 5) = k;
    }
    return g;
  }
  if (kind_ == ScenarioKind::S3Gyro) {
    const Mat3 AR = su2::left_coframe(R_, q.head<3>());
    const Mat3 A = su2::coframe_matrix(q.tail<3>());
    MatX g(6, 6);
    g.topLeftCorner(3, 3) = (1 + k / (R_ * R_)) * AR.transpose() * AR;
    g.topRightCorner(3, 3) = -(k / R_) * AR.transpose() * A;
    g.bottomLeftCorner(3, 3) = -(k / R_) * A.transpose() * AR;
    g.bottomRightCorner(3, 3) = k * A.transpose() * A;
    return g;
  }
  // Generic: polarization of the co-moving kinetic energy.
  const int n = geometry_.dim();
  const VecX x = q.head(n);
  const MatX phi = generic_phi(n, q);
  const Tensor3d ahol = aholonomic_connection(frame_, geometry_, x);
  const MatX gm = geometry_.metric(x);
  const MatX E = frame_.legs_at(x), Einv = frame_.coframe_at(x);
  const MatX J = internal_inertia();
  const double m = inertia_.m;
  auto T = [&](const VecX& qd) {
    return comoving_kinetic_at(ahol, gm, E, Einv, m, J, qd.head(n), phi, generic_phi(n, qd));
  };
  MatX g(dim_, dim_);
  for (int a = 0; a < dim_; ++a)
    for (int b = a; b < dim_; ++b) {
      VecX ea = VecX::Unit(dim_, a), eb = VecX::Unit(dim_, b);
      g(a, b) = g(b, a) = (T(ea + eb) - T(ea - eb)) / (2 * m);
    }
  return g;
}

MatX Scenario::G_inv(const VecX& q) const {
  const MatX g = G(q);
  Eigen::FullPivLU<MatX> lu(g);
  if (!lu.isInvertible() || lu.rcond() < 1e-14) throw Error(ErrorKind::SingularMetric, "configuration metric is singular");
  return lu.inverse();
}

std::vector<MatX> Scenario::G_derivative(const VecX& q) const {
  check(q);
  std::vector<MatX> d(dim_, MatX::Zero(dim_, dim_));
  const double k = inertia_.I / inertia_.m;
  const bool planar = is_2d_gyro(kind_) || is_xy(kind_) || kind_ == ScenarioKind::SphereAffinePolar;
  if (planar) {
    const double u = q(0);
    double w, wp, c, cp;
    if (is_sphere_base(kind_)) {
      w = R_ * std::sin(u / R_), wp = std::cos(u / R_), c = std::cos(u / R_), cp = -std::sin(u / R_) / R_;
    } else if (is_pseudo_base(kind_)) {
      w = R_ * std::sinh(u / R_), wp = std::cosh(u / R_), c = std::cosh(u / R_), cp = std::sinh(u / R_) / R_;
    } else {
      w = L_ + R_ * std::cos(u), wp = -R_ * std::sin(u), c = -std::sin(u), cp = -std::cos(u);
    }
    if (is_2d_gyro(kind_)) {
      const double sg = signature_ == Signature::LorentzType ? -1.0 : 1.0;
      d[0](1, 1) = 2 * w * wp + sg * 2 * k * c * cp;
      d[0](1, 2) = d[0](2, 1) = sg * k * cp;
      return d;
    }
    const Amplitudes a = amplitudes_of(kind_, q);
    d[0](1, 1) = 2 * w * wp + 2 * k * (a.x2 + a.y2) * c * cp;
    d[0](1, 2) = d[0](2, 1) = k * a.x2 * cp;
    d[0](1, 3) = d[0](3, 1) = k * a.y2 * cp;
    for (int j = 0; j < 2; ++j) {
      MatX& dj = d[4 + j];
      dj(1, 1) = k * (a.dx2(j) + a.dy2(j)) * c * c;
      dj(1, 2) = dj(2, 1) = k * a.dx2(j) * c;
      dj(1, 3) = dj(3, 1) = k * a.dy2(j) * c;
      dj(2, 2) = k * a.dx2(j);
      dj(3, 3) = k * a.dy2(j);
    }
    if (kind_ == ScenarioKind::SphereAffinePolar) d[4](5, 5) = 2 * k * q(4);
    return d;
  }
  const auto step = kind_ == ScenarioKind::Generic ? numdiff::Step::Quint : numdiff::Step::Cbrt;
  for (int j = 0; j < dim_; ++j)
    d[j] = numdiff::partial([this](const VecX& y) { return G(y); }, q, j, step);
  return d;
}

double Scenario::vol_density(const VecX& q) const { return std::sqrt(std::abs(G(q).determinant())); }

BodyKinematics Scenario::body_kinematics(const VecX& q, const VecX& qd) const {
  check(q);
  BodyKinematics b;
  if (is_2d_gyro(kind_)) {
    b.x = q.head(2);
    b.v = qd.head(2);
    b.phi = rotation2(q(2));
    b.phi_dot = qd(2) * eps2() * b.phi;
    return b;
  }
  if (is_xy(kind_) || kind_ == ScenarioKind::SphereAffinePolar) {
    b.x = q.head(2);
    b.v = qd.head(2);
    const auto tp = two_polar_kinematics(q, qd);
    b.phi = tp->L * tp->D * tp->Rm.transpose();
    b.phi_dot = tp->L_dot * tp->D * tp->Rm.transpose() + tp->L * tp->D_dot * tp->Rm.transpose() +
                tp->L * tp->D * tp->Rm_dot.transpose();
    return b;
  }
  if (kind_ == ScenarioKind::S3Gyro) {
    b.x = q.head(3);
    b.v = qd.head(3);
    const Vec3 kap = q.tail<3>();
    const Mat3 U = su2::exp_so3(kap);
    b.phi = U;
    b.phi_dot = hat(Vec3(su2::coframe_matrix(kap) * qd.tail<3>())) * U;
    return b;
  }
  const int n = geometry_.dim();
  b.x = q.head(n);
  b.v = qd.head(n);
  b.phi = generic_phi(n, q);
  b.phi_dot = generic_phi(n, qd);
  return b;
}

std::optional<TwoPolarKinematics> Scenario::two_polar_kinematics(const VecX& q, const VecX& qd) const {
  if (!(is_xy(kind_) || kind_ == ScenarioKind::SphereAffinePolar)) return std::nullopt;
  const double a = 0.5 * (q(2) + q(3)), be = 0.5 * (q(2) - q(3));
  const double ad = 0.5 * (qd(2) + qd(3)), bed = 0.5 * (qd(2) - qd(3));
  const Invariants inv = invariants_of(kind_, q, qd);
  TwoPolarKinematics t;
  t.L = rotation2(a);
  t.Rm = rotation2(be);
  t.L_dot = ad * eps2() * t.L;
  t.Rm_dot = bed * eps2() * t.Rm;
  t.D = MatX::Zero(2, 2);
  t.D(0, 0) = inv.lam;
  t.D(1, 1) = inv.mu;
  t.D_dot = MatX::Zero(2, 2);
  t.D_dot(0, 0) = inv.lam_dot;
  t.D_dot(1, 1) = inv.mu_dot;
  return t;
}

double kinetic_energy(const Scenario& s, const VecX& q, const VecX& qdot) {
  return 0.5 * s.inertia().m * qdot.dot(s.G(q) * qdot);
}

MatX body_drift(const BodyKinematics& b, const FrameField& frame, const Geometry& geometry) {
  return drift_matrix(aholonomic_connection(frame, geometry, b.x), frame.coframe_at(b.x) * b.v);
}

double comoving_kinetic(const BodyKinematics& b, double m, const MatX& J, const FrameField& frame,
                        const Geometry& geometry) {
  const Tensor3d ahol = aholonomic_connection(frame, geometry, b.x);
  return comoving_kinetic_at(ahol, geometry.metric(b.x), frame.legs_at(b.x), frame.coframe_at(b.x), m, J, b.v,
                             b.phi, b.phi_dot);
}

double polar_internal_kinetic(const MatX& U, const MatX& A, const MatX& U_dot, const MatX& A_dot,
                              const MatX& omega_E, const MatX& J) {
  const MatX w = U.transpose() * omega_E * U + U.transpose() * U_dot;
  return -0.5 * (A * J * A * w * w).trace() + (A * J * A_dot * w).trace() + 0.5 * (J * A_dot * A_dot).trace();
}

double two_polar_internal_kinetic(const TwoPolarKinematics& tp, const MatX& omega_E, double I) {
  const MatX chi = tp.L.transpose() * omega_E * tp.L + tp.L.transpose() * tp.L_dot;
  const MatX th = tp.Rm.transpose() * tp.Rm_dot;
  const MatX D2 = tp.D * tp.D;
  return 0.5 * I *
         ((tp.D_dot * tp.D_dot).trace() - (chi * chi * D2).trace() - (th * th * D2).trace() +
          2 * (chi * tp.D * th * tp.D).trace());
}

VecX legendre(const Scenario& s, const VecX& q, const VecX& qdot) { return s.inertia().m * (s.G(q) * qdot); }

VecX legendre_inverse(const Scenario& s, const VecX& q, const VecX& p) {
  return s.G_inv(q) * p / s.inertia().m;
}

// ---------------------------------------------------------------------------
// Potentials

struct TabulatedCurve::Impl {
  boost::math::interpolators::pchip<std::vector<double>> spline;
};

TabulatedCurve::TabulatedCurve(std::vector<double> u, std::vector<double> v) {
  if (u.size() != v.size() || u.size() < 4)
    throw Error(ErrorKind::ValidationError, "tabulated potential needs at least 4 (u, V) pairs of equal length");
  for (size_t i = 1; i < u.size(); ++i)
    if (!(u[i] > u[i - 1])) throw Error(ErrorKind::ValidationError, "tabulated abscissae must increase strictly");
  lo_ = u.front();
  hi_ = u.back();
  impl_ = std::make_shared<const Impl>(Impl{{std::move(u), std::move(v)}});
}

double TabulatedCurve::value(double u) const {
  if (u < lo_ || u > hi_) throw Error(ErrorKind::BadParams, "tabulated potential evaluated outside its table range");
  return impl_->spline(u);
}

double TabulatedCurve::derivative(double u) const {
  if (u < lo_ || u > hi_) throw Error(ErrorKind::BadParams, "tabulated potential evaluated outside its table range");
  return impl_->spline.prime(u);
}

const char* to_string(PotentialKind kind) {
  for (const auto& n : kPotentialNames)
    if (n.kind == kind) return n.name;
  return "unknown";
}

PotentialKind potential_from_name(const std::string& name) {
  for (const auto& n : kPotentialNames)
    if (name == n.name) return n.kind;
  std::string allowed;
  for (const auto& n : kPotentialNames) allowed += std::string(allowed.empty() ? "" : ", ") + n.name;
  throw Error(ErrorKind::ValidationError, "unknown potential kind '" + name + "'; allowed: " + allowed);
}

std::vector<std::string> potential_names() {
  std::vector<std::string> out;
  for (const auto& n : kPotentialNames) out.emplace_back(n.name);
  return out;
}

void prepare_potential(PotentialSpec& v) {
  if (v.kind == PotentialKind::CustomTabulated && !v.table)
    v.table = std::make_shared<const TabulatedCurve>(v.table_u, v.table_v);
}

bool is_radial(PotentialKind k) {
  switch (k) {
    case PotentialKind::Zero:
    case PotentialKind::SphereOscillator:
    case PotentialKind::SphereKepler:
    case PotentialKind::PseudoOscillator:
    case PotentialKind::PseudoKepler:
    case PotentialKind::CosPoly:
    case PotentialKind::CosPolyCentrifugal:
    case PotentialKind::ControlTanCubed:
    case PotentialKind::CustomTabulated:
      return true;
    default:
      return false;
  }
}

namespace {

void check_radial_kind(PotentialKind k, const Scenario& s) {
  const ScenarioKind sk = s.kind();
  const char* name = to_string(k);
  auto fail = [&](const std::string& why) {
    throw Error(ErrorKind::ValidationError, std::string("potential '") + name + "' " + why + " (scenario " +
                                                to_string(sk) + ")");
  };
  if (!is_radial(k)) fail("is not a radial potential");
  if (sk == ScenarioKind::S3Gyro && k != PotentialKind::Zero) fail("is not available on S3; only the geodetic flow is modelled");
  if (sk == ScenarioKind::Generic && k != PotentialKind::Zero && k != PotentialKind::CustomTabulated)
    fail("needs a built-in 2D scenario");
  switch (k) {
    case PotentialKind::SphereOscillator:
    case PotentialKind::SphereKepler:
    case PotentialKind::ControlTanCubed:
      if (!is_sphere_base(sk)) fail("requires a sphere scenario");
      break;
    case PotentialKind::PseudoOscillator:
    case PotentialKind::PseudoKepler:
      if (!is_pseudo_base(sk)) fail("requires a pseudosphere scenario");
      break;
    case PotentialKind::CosPoly:
    case PotentialKind::CosPolyCentrifugal:
      if (!is_sphere_base(sk) && !is_torus_base(sk)) fail("requires a sphere or torus scenario");
      break;
    default:
      break;
  }
}

double cos_angle_scale(const Scenario& s) { return is_torus_base(s.kind()) ? 1.0 : 1.0 / s.R(); }

const TabulatedCurve& table_of(const PotentialSpec& v, std::shared_ptr<const TabulatedCurve>& local) {
  if (v.table) return *v.table;
  local = std::make_shared<const TabulatedCurve>(v.table_u, v.table_v);
  return *local;
}

PotentialSpec radial_part(const PotentialSpec& v) {
  PotentialSpec r = v;
  r.kind = v.radial;
  return r;
}

}  // namespace

void check_potential_compatible(const PotentialSpec& v, const Scenario& s) {
  switch (v.kind) {
    case PotentialKind::SeparableRXY:
      if (!is_xy(s.kind()))
        throw Error(ErrorKind::ValidationError, "separable_rxy requires an affine (x, y) scenario");
      check_radial_kind(v.radial, s);
      return;
    case PotentialKind::SeparablePolar:
      if (s.kind() != ScenarioKind::SphereAffinePolar)
        throw Error(ErrorKind::ValidationError, "separable_polar requires the sphere_affine_polar scenario");
      check_radial_kind(v.radial, s);
      return;
    case PotentialKind::Canonical2DElastic:
      if (!is_xy(s.kind()) && s.kind() != ScenarioKind::SphereAffinePolar)
        throw Error(ErrorKind::ValidationError, "canonical_2d_elastic requires an affine scenario");
      check_radial_kind(v.radial, s);
      return;
    default:
      check_radial_kind(v.kind, s);
  }
}

double radial_potential(const PotentialSpec& v, const Scenario& s, double u) {
  const double R = s.R();
  switch (v.kind) {
    case PotentialKind::Zero:
      return 0;
    case PotentialKind::SphereOscillator: {
      const double t = std::tan(u / R);
      return 0.5 * v.kappa * R * R * t * t;
    }
    case PotentialKind::SphereKepler:
      return -(v.alpha / R) / std::tan(u / R);
    case PotentialKind::PseudoOscillator: {
      const double t = std::tanh(u / R);
      return 0.5 * v.kappa * R * R * t * t;
    }
    case PotentialKind::PseudoKepler:
      return -(v.alpha / R) / std::tanh(u / R);
    case PotentialKind::CosPoly: {
      const double c = std::cos(u * cos_angle_scale(s));
      return v.alpha_hat * c * c + v.beta_hat * c;
    }
    case PotentialKind::CosPolyCentrifugal: {
      const double th = u * cos_angle_scale(s);
      const double c = std::cos(th), sn = std::sin(th);
      return (v.alpha_hat * c * c + v.beta_hat * c) / (sn * sn);
    }
    case PotentialKind::ControlTanCubed: {
      const double t = std::tan(u / R);
      return v.kappa * R * R * t * t * t;
    }
    case PotentialKind::CustomTabulated: {
      std::shared_ptr<const TabulatedCurve> local;
      return table_of(v, local).value(u);
    }
    default:
      throw Error(ErrorKind::UnsupportedForce, std::string("potential '") + to_string(v.kind) + "' is not radial");
  }
}

double radial_potential_derivative(const PotentialSpec& v, const Scenario& s, double u) {
  const double R = s.R();
  switch (v.kind) {
    case PotentialKind::Zero:
      return 0;
    case PotentialKind::SphereOscillator: {
      const double t = std::tan(u / R);
      return v.kappa * R * t * (1 + t * t);
    }
    case PotentialKind::SphereKepler: {
      const double sn = std::sin(u / R);
      return (v.alpha / (R * R)) / (sn * sn);
    }
    case PotentialKind::PseudoOscillator: {
      const double t = std::tanh(u / R);
      return v.kappa * R * t * (1 - t * t);
    }
    case PotentialKind::PseudoKepler: {
      const double sn = std::sinh(u / R);
      return (v.alpha / (R * R)) / (sn * sn);
    }
    case PotentialKind::CosPoly: {
      const double k = cos_angle_scale(s);
      const double c = std::cos(u * k), sn = std::sin(u * k);
      return -k * (2 * v.alpha_hat * c + v.beta_hat) * sn;
    }
    case PotentialKind::CosPolyCentrifugal: {
      const double k = cos_angle_scale(s);
      const double c = std::cos(u * k), sn = std::sin(u * k);
      return -k * (2 * v.alpha_hat * c + v.beta_hat * (1 + c * c)) / (sn * sn * sn);
    }
    case PotentialKind::ControlTanCubed: {
      const double t = std::tan(u / R);
      return 3 * v.kappa * R * t * t * (1 + t * t);
    }
    case PotentialKind::CustomTabulated: {
      std::shared_ptr<const TabulatedCurve> local;
      return table_of(v, local).derivative(u);
    }
    default:
      throw Error(ErrorKind::UnsupportedForce, std::string("potential '") + to_string(v.kind) + "' is not radial");
  }
}

double potential(const PotentialSpec& v, const Scenario& s, const VecX& q) {
  switch (v.kind) {
    case PotentialKind::SeparableRXY:
      return radial_potential(radial_part(v), s, q(0)) + 0.5 * v.kx * q(4) * q(4) + 0.5 * v.ky * q(5) * q(5);
    case PotentialKind::SeparablePolar: {
      const double rho = q(4), e = q(5);
      return radial_potential(radial_part(v), s, q(0)) + 0.5 * v.krho * rho * rho +
             2 * v.keps / (rho * rho * std::cos(2 * e));
    }
    case PotentialKind::Canonical2DElastic: {
      const double vr = radial_potential(radial_part(v), s, q(0));
      if (s.kind() == ScenarioKind::SphereAffinePolar) {
        const double rho = q(4), e = q(5);
        return vr + v.kappa * (0.5 * rho * rho + 2 / (rho * rho * std::cos(2 * e)));
      }
      const double x = q(4), y = q(5);
      return vr + v.kappa * (0.5 * (x * x + y * y) + 2 / (y * y - x * x));
    }
    default:
      if (v.kind == PotentialKind::Zero) return 0;
      return radial_potential(v, s, q(0));
  }
}

VecX potential_gradient(const PotentialSpec& v, const Scenario& s, const VecX& q) {
  VecX g = VecX::Zero(q.size());
  switch (v.kind) {
    case PotentialKind::Zero:
      return g;
    case PotentialKind::SeparableRXY:
      g(0) = radial_potential_derivative(radial_part(v), s, q(0));
      g(4) = v.kx * q(4);
      g(5) = v.ky * q(5);
      return g;
    case PotentialKind::SeparablePolar:
    case PotentialKind::Canonical2DElastic: {
      g(0) = radial_potential_derivative(radial_part(v), s, q(0));
      if (s.kind() == ScenarioKind::SphereAffinePolar) {
        const double kr = v.kind == PotentialKind::SeparablePolar ? v.krho : v.kappa;
        const double ke = v.kind == PotentialKind::SeparablePolar ? v.keps : v.kappa;
        const double rho = q(4), e = q(5);
        const double c2 = std::cos(2 * e);
        g(4) = kr * rho - 4 * ke / (rho * rho * rho * c2);
        g(5) = 4 * ke * std::sin(2 * e) / (rho * rho * c2 * c2);
      } else {
        const double x = q(4), y = q(5);
        const double d = y * y - x * x;
        g(4) = v.kappa * (x + 4 * x / (d * d));
        g(5) = v.kappa * (y - 4 * y / (d * d));
      }
      return g;
    }
    default:
      g(0) = radial_potential_derivative(v, s, q(0));
      return g;
  }
}

// ---------------------------------------------------------------------------
// Hamiltonian system

HamiltonianSystem::HamiltonianSystem(Scenario scenario, PotentialSpec potential)
    : scenario_(std::move(scenario)), potential_(std::move(potential)) {
  check_potential_compatible(potential_, scenario_);
  prepare_potential(potential_);
}

double hamiltonian(const Scenario& s, const VecX& q, const VecX& p, const PotentialSpec& v) {
  const VecX u = s.G_inv(q) * p;
  return 0.5 * p.dot(u) / s.inertia().m + potential(v, s, q);
}

double HamiltonianSystem::hamiltonian(const VecX& q, const VecX& p) const {
  return cb::hamiltonian(scenario_, q, p, potential_);
}

VecX HamiltonianSystem::rhs(const VecX& z) const {
  const int n = dim();
  const VecX q = z.head(n), p = z.tail(n);
  const double m = scenario_.inertia().m;
  const VecX u = scenario_.G_inv(q) * p;
  const auto dG = scenario_.G_derivative(q);
  const VecX dV = potential_gradient(potential_, scenario_, q);
  VecX out(2 * n);
  out.head(n) = u / m;
  for (int k = 0; k < n; ++k) out(n + k) = 0.5 * u.dot(dG[k] * u) / m - dV(k);
  return out;
}

double HamiltonianSystem::characteristic_time(double E) const {
  const double e = std::max(E, 1.0);
  const double m = scenario_.inertia().m, I = scenario_.inertia().I;
  return 2 * kPi * std::max(scenario_.R() * std::sqrt(m / e), std::sqrt(I / e));
}

su2::MomentumPair s3_momenta(const Scenario& s, const VecX& q, const VecX& p) {
  if (s.kind() != ScenarioKind::S3Gyro) throw Error(ErrorKind::UnsupportedChart, "s3_momenta needs the s3_gyro scenario");
  const Mat3 AR = su2::left_coframe(s.R(), q.head<3>());
  const Mat3 A = su2::coframe_matrix(q.tail<3>());
  su2::MomentumPair m;
  m.S = AR.transpose().partialPivLu().solve(Vec3(p.head<3>()));
  m.Srl = A.transpose().partialPivLu().solve(Vec3(p.tail<3>()));
  return m;
}

const char* to_string(Method m) { return m == Method::RK4 ? "rk4" : "implicit_midpoint"; }

Method method_from_name(const std::string& name) {
  if (name == "rk4") return Method::RK4;
  if (name == "implicit_midpoint") return Method::ImplicitMidpoint;
  throw Error(ErrorKind::ValidationError, "unknown integrator '" + name + "'; allowed: rk4, implicit_midpoint");
}

VecX step(const HamiltonianSystem& sys, const VecX& z, double dt, const IntegratorOptions& opt, int* iterations) {
  if (opt.method == Method::RK4) {
    namespace ode = boost::numeric::odeint;
    ode::runge_kutta4<VecX, double, VecX, double, ode::vector_space_algebra> rk;
    VecX y = z;
    rk.do_step([&](const VecX& s, VecX& ds, double) { ds = sys.rhs(s); }, y, 0.0, dt);
    if (iterations) *iterations = 4;
    return y;
  }
  if (opt.composition == 3) {
    const double g1 = 1.0 / (2.0 - std::cbrt(2.0));
    const double g2 = 1.0 - 2.0 * g1;
    IntegratorOptions plain = opt;
    plain.composition = 1;
    int a = 0, b = 0, c = 0;
    VecX y = step(sys, z, g1 * dt, plain, &a);
    y = step(sys, y, g2 * dt, plain, &b);
    y = step(sys, y, g1 * dt, plain, &c);
    if (iterations) *iterations = a + b + c;
    return y;
  }
  if (opt.composition != 1) throw Error(ErrorKind::BadParams, "composition must be 1 or 3");
  VecX z1 = z + dt * sys.rhs(z);
  double prev = std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    const VecX next = z + dt * sys.rhs(0.5 * (z + z1));
    const double diff = (next - z1).lpNorm<Eigen::Infinity>();
    z1 = next;
    const double scale = 1.0 + z1.lpNorm<Eigen::Infinity>();
    if (diff <= opt.newton_tol * scale) break;
    // Stop once roundoff dominates and the iteration no longer contracts.
    if (diff >= prev && diff <= 1e-12 * scale) break;
    prev = diff;
  }
  if (iterations) *iterations = it + 1;
  return z1;
}

Trajectory integrate(const HamiltonianSystem& sys, const VecX& q0, const VecX& p0, const IntegratorOptions& opt) {
  if (!(opt.dt > 0)) throw Error(ErrorKind::BadParams, "dt must be positive");
  if (opt.steps < 0) throw Error(ErrorKind::BadParams, "steps must be non-negative");
  const Scenario& sc = sys.scenario();
  sc.check(q0);
  const int n = sys.dim();
  VecX z(2 * n);
  z << q0, p0;

  Trajectory tr;
  const double E0 = sys.hamiltonian(q0, p0);
  const double escale = E0 != 0 ? std::abs(E0) : 1.0;
  const bool s3 = sc.kind() == ScenarioKind::S3Gyro;
  su2::FlowConstants c0;
  const su2::BodyParams bp{sc.inertia().m, sc.inertia().I, sc.R()};
  if (s3) c0 = su2::flow_constants(s3_momenta(sc, q0, p0), bp);
  su2::FlowConstants clast = c0;
  const bool gyro = sc.is_gyro();

  auto constraint_residual = [&](const VecX& q) {
    if (!gyro) return 0.0;
    const BodyKinematics b = sc.body_kinematics(q, VecX::Zero(n));
    const int k = static_cast<int>(b.phi.rows());
    return (b.phi.transpose() * b.phi - MatX::Identity(k, k)).cwiseAbs().maxCoeff();
  };
  auto record = [&](double t, const VecX& zz, double E) {
    tr.t.push_back(t);
    tr.q.push_back(zz.head(n));
    tr.p.push_back(zz.tail(n));
    tr.E.push_back(E);
  };
  record(0.0, z, E0);
  double max_s = 0, max_srl = 0, max_c = 0;

  for (long k = 1; k <= opt.steps; ++k) {
    int its = 0;
    VecX next;
    try {
      next = step(sys, z, opt.dt, opt, &its);
      sc.check(next.head(n));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SingularPoint && e.kind() != ErrorKind::SingularMetric &&
          e.kind() != ErrorKind::SingularPhi)
        throw;
      tr.stopped_at_singularity = true;
      tr.stop_reason = std::string(to_string(ErrorKind::StepIntoSingularity)) + " at step " + std::to_string(k) +
                       ": " + e.what();
      break;
    }
    z = next;
    tr.steps_taken = k;
    tr.fixed_point_iterations += its;
    const double E = sys.hamiltonian(z.head(n), z.tail(n));
    tr.max_rel_energy_drift = std::max(tr.max_rel_energy_drift, std::abs(E - E0) / escale);
    for (int c : sc.cyclic())
      tr.max_abs_cyclic_drift = std::max(tr.max_abs_cyclic_drift, std::abs(z(n + c) - p0(c)));
    if (s3) {
      clast = su2::flow_constants(s3_momenta(sc, z.head(n), z.tail(n)), bp);
      max_s = std::max(max_s, std::abs(clast.S_norm - c0.S_norm));
      max_srl = std::max(max_srl, std::abs(clast.Srl_norm - c0.Srl_norm));
      max_c = std::max(max_c, (clast.conserved - c0.conserved).norm());
    }
    if (opt.output_every > 0 && k % opt.output_every == 0) {
      record(k * opt.dt, z, E);
      tr.max_constraint_residual = std::max(tr.max_constraint_residual, constraint_residual(z.head(n)));
    }
  }
  tr.max_constraint_residual = std::max(tr.max_constraint_residual, constraint_residual(z.head(n)));

  const double Ef = sys.hamiltonian(z.head(n), z.tail(n));
  tr.conservation.push_back({"E", E0, Ef, tr.max_rel_energy_drift});
  for (int c : sc.cyclic()) {
    double drift = 0;
    for (const auto& p : tr.p) drift = std::max(drift, std::abs(p(c) - p0(c)));
    tr.conservation.push_back({"p_" + sc.coordinate_names()[c], p0(c), z(n + c),
                               drift / (p0(c) != 0 ? std::abs(p0(c)) : 1.0)});
  }
  if (s3) {
    auto rel = [](double d, double ref) { return d / (ref != 0 ? std::abs(ref) : 1.0); };
    tr.conservation.push_back({"|S|", c0.S_norm, clast.S_norm, rel(max_s, c0.S_norm)});
    tr.conservation.push_back({"|Srl|", c0.Srl_norm, clast.Srl_norm, rel(max_srl, c0.Srl_norm)});
    for (int i = 0; i < 3; ++i)
      tr.conservation.push_back({"c" + std::to_string(i + 1), c0.conserved(i), clast.conserved(i),
                                 rel(max_c, c0.conserved.norm())});
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Balance form

const char* to_string(ConstraintMode m) {
  switch (m) {
    case ConstraintMode::None: return "none";
    case ConstraintMode::Gyroscopic: return "gyroscopic";
    case ConstraintMode::Incompressible: return "incompressible";
    case ConstraintMode::Dilatational: return "dilatational";
    case ConstraintMode::Rotationless: return "rotationless";
  }
  return "unknown";
}

ConstraintMode combine_constraints(const std::vector<ConstraintMode>& modes) {
  ConstraintMode acc = ConstraintMode::None;
  for (ConstraintMode m : modes) {
    if (m == ConstraintMode::None || m == acc) continue;
    if (acc == ConstraintMode::None) {
      acc = m;
      continue;
    }
    // Skew matrices are traceless, so the gyroscopic constraint already implies incompressibility.
    const bool gyro_incomp = (acc == ConstraintMode::Gyroscopic && m == ConstraintMode::Incompressible) ||
                             (m == ConstraintMode::Gyroscopic && acc == ConstraintMode::Incompressible);
    if (gyro_incomp) {
      acc = ConstraintMode::Gyroscopic;
      continue;
    }
    throw Error(ErrorKind::IncompatibleMode, std::string("constraints '") + to_string(acc) + "' and '" +
                                                 to_string(m) + "' admit no common nonzero motion in this model");
  }
  return acc;
}

MatX project_velocity(const MatX& m, ConstraintMode mode) {
  const int n = static_cast<int>(m.rows());
  const MatX I = MatX::Identity(n, n);
  switch (mode) {
    case ConstraintMode::None: return m;
    case ConstraintMode::Gyroscopic: return skew_part<double>(m);
    case ConstraintMode::Incompressible: return m - (m.trace() / n) * I;
    case ConstraintMode::Dilatational: return (m.trace() / n) * I;
    case ConstraintMode::Rotationless: return sym_part<double>(m);
  }
  return m;
}

namespace {

std::vector<MatX> subspace_basis(int n, ConstraintMode mode) {
  std::vector<MatX> basis;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      MatX e = MatX::Zero(n, n);
      e(i, j) = 1;
      basis.push_back(e);
    }
  // Project the unit basis and orthonormalize (Frobenius inner product).
  std::vector<MatX> out;
  for (const MatX& e : basis) {
    MatX v = project_velocity(e, mode);
    for (const MatX& b : out) v -= (b.cwiseProduct(v)).sum() * b;
    const double nv = v.norm();
    if (nv > 1e-10) out.push_back(v / nv);
  }
  return out;
}

}  // namespace

MatX constraint_project(const MatX& rhs, ConstraintMode mode, const MatX& Je) {
  const int n = static_cast<int>(rhs.rows());
  if (mode == ConstraintMode::None) return rhs * Je.inverse();
  const auto B = subspace_basis(n, mode);
  const int d = static_cast<int>(B.size());
  MatX M(d, d);
  VecX b(d);
  for (int k = 0; k < d; ++k) {
    b(k) = B[k].cwiseProduct(rhs).sum();
    for (int l = 0; l < d; ++l) M(k, l) = B[k].cwiseProduct(B[l] * Je).sum();
  }
  const VecX x = M.fullPivLu().solve(b);
  MatX X = MatX::Zero(n, n);
  for (int l = 0; l < d; ++l) X += x(l) * B[l];
  return X;
}

MatX kinematical_affine_spin(const BalanceState& s, const BalanceBody& b) {
  const MatX W = s.omega * s.phi;
  return s.phi * b.J * W.transpose();
}

MatX spin(const BalanceState& s, const BalanceBody& b) {
  const MatX K = kinematical_affine_spin(s, b);
  return K - K.transpose();
}

MatX omega_from_spin(const MatX& S, const MatX& phi, const MatX& J) {
  const int n = static_cast<int>(S.rows());
  const MatX Je = phi * J * phi.transpose();
  // Solve Je Ω + Ω Je = −S in the eigenbasis of Je.
  Eigen::SelfAdjointEigenSolver<MatX> es(sym_part<double>(Je));
  const MatX V = es.eigenvectors();
  const VecX a = es.eigenvalues();
  const MatX St = V.transpose() * S * V;
  MatX Wt(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) Wt(i, j) = -St(i, j) / (a(i) + a(j));
  return V * Wt * V.transpose();
}

namespace {

struct FrameGeometry {
  MatX E, Einv;
  Tensor3d ahol;
  Tensor4d curvature;  // ℛ̂^L_KAJ
  Tensor3d torsion;    // Ŝ^A_BC
};

FrameGeometry frame_geometry(const BalanceSystem& sys, const VecX& x) {
  const int n = sys.geometry.dim();
  FrameGeometry f;
  f.E = sys.frame.legs_at(x);
  f.Einv = sys.frame.coframe_at(x);
  f.ahol = aholonomic_connection(sys.frame, sys.geometry, x);
  const Tensor4d Rc = sys.geometry.curvature(x);
  // Contract one index at a time with E or E⁻¹.
  Tensor4d t1(n), t2(n), t3(n);
  f.curvature = Tensor4d(n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int i = 0; i < n; ++i)
        for (int J = 0; J < n; ++J) {
          double s = 0;
          for (int j = 0; j < n; ++j) s += Rc(a, b, i, j) * f.E(j, J);
          t1(a, b, i, J) = s;
        }
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int A = 0; A < n; ++A)
        for (int J = 0; J < n; ++J) {
          double s = 0;
          for (int i = 0; i < n; ++i) s += t1(a, b, i, J) * f.E(i, A);
          t2(a, b, A, J) = s;
        }
  for (int a = 0; a < n; ++a)
    for (int K = 0; K < n; ++K)
      for (int A = 0; A < n; ++A)
        for (int J = 0; J < n; ++J) {
          double s = 0;
          for (int b = 0; b < n; ++b) s += t2(a, b, A, J) * f.E(b, K);
          t3(a, K, A, J) = s;
        }
  for (int L = 0; L < n; ++L)
    for (int K = 0; K < n; ++K)
      for (int A = 0; A < n; ++A)
        for (int J = 0; J < n; ++J) {
          double s = 0;
          for (int a = 0; a < n; ++a) s += f.Einv(L, a) * t3(a, K, A, J);
          f.curvature(L, K, A, J) = s;
        }
  const Tensor3d S = sys.geometry.torsion(x);
  f.torsion = Tensor3d(n);
  for (int A = 0; A < n; ++A) {
    MatX sA = MatX::Zero(n, n);
    for (int i = 0; i < n; ++i) sA += f.Einv(A, i) * S.slice(i);
    f.torsion.slice(A) = f.E.transpose() * sA * f.E;
  }
  return f;
}

struct GeometricForces {
  VecX curv, tors;
};

GeometricForces geometric_forces(const FrameGeometry& f, const BalanceState& s, const BalanceBody& b) {
  const int n = static_cast<int>(s.v_hat.size());
  const MatX S = spin(s, b);
  GeometricForces g{VecX::Zero(n), VecX::Zero(n)};
  for (int A = 0; A < n; ++A) {
    double c = 0, t = 0;
    for (int K = 0; K < n; ++K)
      for (int L = 0; L < n; ++L)
        for (int J = 0; J < n; ++J) c += S(K, L) * f.curvature(L, K, A, J) * s.v_hat(J);
    for (int B = 0; B < n; ++B)
      for (int C = 0; C < n; ++C) t += s.v_hat(B) * s.v_hat(C) * f.torsion(B, C, A);
    g.curv(A) = 0.5 * c;
    g.tors(A) = 2 * b.m * t;
  }
  return g;
}

}  // namespace

BalanceRates balance_rhs(const BalanceSystem& sys, const BalanceState& s) {
  check_point(sys.geometry.chart(), s.x);
  if (!sys.frame.orthonormal) throw Error(ErrorKind::SingularFrame, "balance form needs an orthonormal frame");
  const int n = sys.geometry.dim();
  const FrameGeometry f = frame_geometry(sys, s.x);
  const MatX wE = drift_matrix(f.ahol, s.v_hat);
  const GeometricForces gf = geometric_forces(f, s, sys.body);
  const VecX F = sys.force ? sys.force(s.x, s.phi) : VecX::Zero(n);
  const MatX N = sys.torque ? sys.torque(s.x, s.phi) : MatX::Zero(n, n);

  BalanceRates r;
  r.F_curv = gf.curv;
  r.F_tors = gf.tors;
  r.dx = f.E * s.v_hat;
  r.dv_hat = -wE * s.v_hat + (gf.curv + gf.tors + F) / sys.body.m;
  r.dphi = s.omega * s.phi - wE * s.phi;
  const MatX Je = s.phi * sys.body.J * s.phi.transpose();
  const MatX X = constraint_project(N.transpose() - s.omega * s.omega * Je, sys.body.mode, Je);
  r.domega = X - (wE * s.omega - s.omega * wE);
  return r;
}

void enforce_constraint(BalanceState& s, ConstraintMode mode) {
  const int n = static_cast<int>(s.phi.rows());
  s.omega = project_velocity(s.omega, mode);
  switch (mode) {
    case ConstraintMode::Gyroscopic:
      s.phi = orthogonal_retraction(s.phi);
      break;
    case ConstraintMode::Incompressible:
      s.phi /= std::pow(s.phi.determinant(), 1.0 / n);
      break;
    case ConstraintMode::Dilatational:
      s.phi = std::pow(std::abs(s.phi.determinant()), 1.0 / n) * orthogonal_retraction(s.phi);
      break;
    default:
      break;
  }
}

BalanceState balance_rk4_step(const BalanceSystem& sys, const BalanceState& s, double dt) {
  auto add = [](const BalanceState& a, const BalanceRates& r, double h) {
    BalanceState o = a;
    o.x += h * r.dx;
    o.v_hat += h * r.dv_hat;
    o.phi += h * r.dphi;
    o.omega += h * r.domega;
    return o;
  };
  const BalanceRates k1 = balance_rhs(sys, s);
  const BalanceRates k2 = balance_rhs(sys, add(s, k1, dt / 2));
  const BalanceRates k3 = balance_rhs(sys, add(s, k2, dt / 2));
  const BalanceRates k4 = balance_rhs(sys, add(s, k3, dt));
  BalanceState o = s;
  o.x += dt / 6 * (k1.dx + 2 * k2.dx + 2 * k3.dx + k4.dx);
  o.v_hat += dt / 6 * (k1.dv_hat + 2 * k2.dv_hat + 2 * k3.dv_hat + k4.dv_hat);
  o.phi += dt / 6 * (k1.dphi + 2 * k2.dphi + 2 * k3.dphi + k4.dphi);
  o.omega += dt / 6 * (k1.domega + 2 * k2.domega + 2 * k3.domega + k4.domega);
  enforce_constraint(o, sys.body.mode);
  return o;
}

double balance_energy(const BalanceSystem& sys, const BalanceState& s) {
  const MatX W = s.omega * s.phi;
  const double T = 0.5 * sys.body.m * s.v_hat.squaredNorm() + 0.5 * (W.transpose() * W * sys.body.J).trace();
  return T + (sys.potential ? sys.potential(s.x, s.phi) : 0.0);
}

double geometric_power(const BalanceSystem& sys, const BalanceState& s) {
  const FrameGeometry f = frame_geometry(sys, s.x);
  const GeometricForces gf = geometric_forces(f, s, sys.body);
  return s.v_hat.dot(gf.curv + gf.tors);
}

}  // namespace cb
