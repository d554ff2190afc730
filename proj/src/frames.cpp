#include "curvedbody/frames.hpp"

#include "curvedbody/numdiff.hpp"
#include "curvedbody/su2.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace cb {

MatX FrameField::coframe_at(const VecX& x) const {
  if (coframe_fn) return coframe_fn(x);
  const MatX E = legs(x);
  Eigen::FullPivLU<MatX> lu(E);
  if (!lu.isInvertible()) throw Error(ErrorKind::SingularFrame, "frame legs are not invertible");
  return lu.inverse();
}

FrameField builtin_frame(const Chart& chart, Handedness side) {
  FrameField f;
  f.name = chart.name();
  f.orthonormal = true;
  const Chart c = chart;
  switch (c.kind) {
    case ChartKind::Sphere2:
    case ChartKind::Pseudosphere2:
    case ChartKind::Torus2: {
      auto widths = [c](const VecX& x) -> Eigen::Vector2d {
        check_point(c, x);
        if (c.kind == ChartKind::Sphere2) return {1.0, c.R * std::sin(x(0) / c.R)};
        if (c.kind == ChartKind::Pseudosphere2) return {1.0, c.R * std::sinh(x(0) / c.R)};
        return {c.R, c.L + c.R * std::cos(x(0))};
      };
      // d w_φ / d x⁰; the first width is constant.
      auto width_slope = [c](const VecX& x) {
        if (c.kind == ChartKind::Sphere2) return std::cos(x(0) / c.R);
        if (c.kind == ChartKind::Pseudosphere2) return std::cosh(x(0) / c.R);
        return -c.R * std::sin(x(0));
      };
      f.legs = [widths](const VecX& x) -> MatX { return widths(x).cwiseInverse().asDiagonal(); };
      f.coframe_fn = [widths](const VecX& x) -> MatX { return widths(x).asDiagonal(); };
      f.legs_derivative = [widths, width_slope](const VecX& x) {
        const Eigen::Vector2d w = widths(x);
        std::vector<MatX> d(2, MatX::Zero(2, 2));
        d[0](1, 1) = -width_slope(x) / (w(1) * w(1));
        return d;
      };
      return f;
    }
    case ChartKind::Flat: {
      const int n = c.dim;
      f.legs = [n](const VecX&) -> MatX { return MatX::Identity(n, n); };
      f.coframe_fn = f.legs;
      f.legs_derivative = [n](const VecX&) { return std::vector<MatX>(n, MatX::Zero(n, n)); };
      return f;
    }
    case ChartKind::Sphere3: {
      const double R = c.R;
      const bool left = side == Handedness::Left;
      f.name = left ? "sphere3-left" : "sphere3-right";
      f.legs = [c, R, left](const VecX& x) -> MatX {
        check_point(c, x);
        return left ? su2::left_legs(R, x) : su2::right_legs(R, x);
      };
      f.coframe_fn = [c, R, left](const VecX& x) -> MatX {
        check_point(c, x);
        return left ? su2::left_coframe(R, x) : su2::right_coframe(R, x);
      };
      return f;
    }
    case ChartKind::Custom:
      break;
  }
  throw Error(ErrorKind::UnsupportedChart,
              "no built-in frame for custom charts; supply legs or use gram_schmidt_frame");
}

FrameField gram_schmidt_frame(const Chart& chart) {
  FrameField f;
  f.name = chart.name() + "-gram-schmidt";
  f.orthonormal = true;
  const Chart c = chart;
  f.legs = [c](const VecX& x) -> MatX {
    Eigen::LLT<MatX> llt(metric_at(c, x));
    if (llt.info() != Eigen::Success) throw Error(ErrorKind::SingularFrame, "metric is not positive-definite");
    const MatX Lm = llt.matrixL();
    return Lm.transpose().triangularView<Eigen::Upper>().solve(MatX::Identity(c.dim, c.dim));
  };
  return f;
}

std::vector<MatX> frame_derivative(const FrameField& frame, const VecX& x) {
  if (frame.legs_derivative) return frame.legs_derivative(x);
  std::vector<MatX> d;
  d.reserve(x.size());
  for (int k = 0; k < x.size(); ++k)
    d.push_back(numdiff::partial([&](const VecX& y) { return frame.legs_at(y); }, x, k, numdiff::Step::Quint));
  return d;
}

Tensor3d aholonomic_connection(const FrameField& frame, const Geometry& geo, const VecX& x) {
  const int n = geo.dim();
  const MatX E = frame.legs_at(x);
  const MatX Einv = frame.coframe_at(x);
  const auto dE = frame_derivative(frame, x);
  const Tensor3d gm = geo.gamma(x);
  // nabla[C](i, B) = (∇_{E_C} E_B)^i
  Tensor3d out(n);
  for (int C = 0; C < n; ++C) {
    MatX nab = MatX::Zero(n, n);
    for (int k = 0; k < n; ++k) {
      MatX term = dE[k];
      for (int i = 0; i < n; ++i) term.row(i) += (gm.slice(i).col(k)).transpose() * E;
      nab += E(k, C) * term;
    }
    const MatX comps = Einv * nab;  // comps(A, B)
    for (int A = 0; A < n; ++A)
      for (int B = 0; B < n; ++B) out(A, B, C) = comps(A, B);
  }
  return out;
}

MatX drift_matrix(const Tensor3d& ahol, const VecX& v_hat) {
  const int n = ahol.dim();
  MatX w(n, n);
  for (int A = 0; A < n; ++A) w.row(A) = (ahol.slice(A) * v_hat).transpose();
  return w;
}

TeleparallelObjects teleparallel_objects(const FrameField& frame, const VecX& x) {
  const int n = static_cast<int>(x.size());
  const MatX E = frame.legs_at(x);
  const MatX Einv = frame.coframe_at(x);
  const auto dE = frame_derivative(frame, x);
  TeleparallelObjects t{Tensor3d(n), Tensor3d(n), Tensor3d(n)};
  for (int k = 0; k < n; ++k) {
    const MatX gk = -dE[k] * Einv;  // Γ[E]^i_jk = E^i_A ∂_k E^A_j
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) t.gamma(i, j, k) = gk(i, j);
  }
  t.torsion = torsion_of(t.gamma);
  for (int B = 0; B < n; ++B)
    for (int C = 0; C < n; ++C) {
      VecX br = VecX::Zero(n);
      for (int k = 0; k < n; ++k) br += E(k, B) * dE[k].col(C) - E(k, C) * dE[k].col(B);
      const VecX comps = Einv * br;
      for (int A = 0; A < n; ++A) t.omega(A, B, C) = comps(A);
    }
  return t;
}

Tensor3d schouten_from_coframe(const FrameField& frame, const VecX& x) {
  const int n = static_cast<int>(x.size());
  const MatX E = frame.legs_at(x);
  std::vector<MatX> dC;
  for (int k = 0; k < n; ++k)
    dC.push_back(numdiff::partial([&](const VecX& y) { return frame.coframe_at(y); }, x, k, numdiff::Step::Quint));
  Tensor3d om(n);
  for (int A = 0; A < n; ++A) {
    MatX dA(n, n);  // dA(j, k) = ∂_j E^A_k − ∂_k E^A_j
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) dA(j, k) = dC[j](A, k) - dC[k](A, j);
    om.slice(A) = -E.transpose() * dA * E;
  }
  return om;
}

double teleparallel_parallelism_residual(const FrameField& frame, const VecX& x) {
  const int n = static_cast<int>(x.size());
  const MatX E = frame.legs_at(x);
  const auto dE = frame_derivative(frame, x);
  const TeleparallelObjects t = teleparallel_objects(frame, x);
  double res = 0;
  for (int k = 0; k < n; ++k) {
    MatX v = dE[k];
    for (int i = 0; i < n; ++i) v.row(i) += t.gamma.slice(i).col(k).transpose() * E;
    res = std::max(res, v.cwiseAbs().maxCoeff());
  }
  return res;
}

void check_configuration(const InternalConfiguration& c, double tol) {
  const int n = static_cast<int>(c.phi.rows());
  if (c.phi.cols() != n || c.base_point.size() != n)
    throw Error(ErrorKind::DimensionMismatch, "internal configuration must be n x n at an n-dimensional point");
  if (c.mode == BodyMode::Gyroscopic) {
    const double r = (c.phi.transpose() * c.phi - MatX::Identity(n, n)).cwiseAbs().maxCoeff();
    if (r > tol) throw Error(ErrorKind::SingularPhi, "gyroscopic configuration is not orthogonal");
  } else if (!(c.phi.determinant() > 0)) {
    throw Error(ErrorKind::SingularPhi, "affine configuration needs det phi > 0");
  }
}

CoMovingVelocity comoving_velocity(const InternalConfiguration& c, const VecX& v, const MatX& phi_dot,
                                   const FrameField& frame, const Geometry& geo) {
  Eigen::FullPivLU<MatX> lu(c.phi);
  if (!lu.isInvertible()) throw Error(ErrorKind::SingularPhi, "det phi = 0");
  const MatX phi_inv = lu.inverse();
  const MatX E = frame.legs_at(c.base_point);
  const MatX Einv = frame.coframe_at(c.base_point);
  CoMovingVelocity out;
  out.v_hat = Einv * v;
  out.omega_E = drift_matrix(aholonomic_connection(frame, geo, c.base_point), out.v_hat);
  out.drift = phi_inv * out.omega_E * c.phi;
  out.relative = phi_inv * phi_dot;
  out.omega_hat = out.drift + out.relative;
  const MatX e = E * c.phi;
  out.spatial = e * out.omega_hat * e.inverse();
  return out;
}

DeformationTensors deformation_tensors(const InternalConfiguration& c, const MatX& g, const MatX& E) {
  const int n = static_cast<int>(c.phi.rows());
  Eigen::FullPivLU<MatX> lu(c.phi);
  if (!lu.isInvertible()) throw Error(ErrorKind::SingularPhi, "det phi = 0");
  DeformationTensors d;
  const MatX e = E * c.phi;
  const MatX einv = e.inverse();
  const MatX I = MatX::Identity(n, n);
  d.green = e.transpose() * g * e;
  d.cauchy = einv.transpose() * einv;
  d.lagrange = 0.5 * (d.green - I);
  d.euler = 0.5 * (g - d.cauchy);
  Eigen::SelfAdjointEigenSolver<MatX> es(sym_part<double>(d.green));
  VecX ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  d.invariants = ev.reverse();
  if (n == 2) {
    const double lam = d.invariants(0), mu = d.invariants(1);
    d.x = (lam - mu) / std::sqrt(2.0);
    d.y = (lam + mu) / std::sqrt(2.0);
    d.rho = std::hypot(d.x, d.y);
    d.eps_angle = std::atan2(d.x, d.y);
  }
  return d;
}

PolarDecomposition polar(const MatX& phi) {
  Eigen::JacobiSVD<MatX> svd(phi, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const VecX s = svd.singularValues();
  if (s.minCoeff() <= 1e-300 || s.minCoeff() <= 1e-14 * s.maxCoeff())
    throw Error(ErrorKind::SingularPhi, "polar decomposition of a singular matrix");
  PolarDecomposition p;
  p.U = svd.matrixU() * svd.matrixV().transpose();
  p.A = svd.matrixV() * s.asDiagonal() * svd.matrixV().transpose();
  p.B = svd.matrixU() * s.asDiagonal() * svd.matrixU().transpose();
  return p;
}

TwoPolarDecomposition two_polar(const MatX& phi) {
  const int n = static_cast<int>(phi.rows());
  Eigen::JacobiSVD<MatX> svd(phi, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const VecX s = svd.singularValues();
  if (s.minCoeff() <= 1e-14 * s.maxCoeff()) throw Error(ErrorKind::SingularPhi, "two-polar decomposition of a singular matrix");
  TwoPolarDecomposition t;
  if (s.maxCoeff() - s.minCoeff() <= 1e-12 * s.maxCoeff()) {
    const PolarDecomposition p = polar(phi);
    t.L = p.U;
    t.D = MatX::Identity(n, n) * s.mean();
    t.Rm = MatX::Identity(n, n);
    t.degenerate = true;
    return t;
  }
  t.L = svd.matrixU();
  t.Rm = svd.matrixV();
  t.D = s.asDiagonal();
  for (int c = 0; c + 1 < n; ++c) {
    int i = 0;
    while (i < n && std::abs(t.L(i, c)) <= 1e-14) ++i;
    if (i < n && t.L(i, c) < 0) {
      t.L.col(c) *= -1;
      t.Rm.col(c) *= -1;
    }
  }
  if (t.L.determinant() < 0) {
    t.L.col(n - 1) *= -1;
    t.Rm.col(n - 1) *= -1;
  }
  return t;
}

PolarRates polar_rates(const PolarDecomposition& pd, const MatX& phi_dot) {
  const int n = static_cast<int>(pd.A.rows());
  const MatX X = pd.U.transpose() * phi_dot;
  Eigen::SelfAdjointEigenSolver<MatX> es(pd.A);
  const MatX V = es.eigenvectors();
  const VecX a = es.eigenvalues();
  const MatX Y = V.transpose() * (X - X.transpose()) * V;
  MatX Wt(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) Wt(i, j) = Y(i, j) / (a(i) + a(j));
  const MatX Omega = V * Wt * V.transpose();
  PolarRates r;
  r.U_dot = pd.U * Omega;
  r.A_dot = X - Omega * pd.A;
  return r;
}

TwoPolarRates two_polar_rates(const TwoPolarDecomposition& tp, const MatX& phi_dot) {
  const int n = static_cast<int>(tp.D.rows());
  const MatX M = tp.L.transpose() * phi_dot * tp.Rm;
  MatX Lam = MatX::Zero(n, n), The = MatX::Zero(n, n), Dd = MatX::Zero(n, n);
  for (int i = 0; i < n; ++i) Dd(i, i) = M(i, i);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double di = tp.D(i, i), dj = tp.D(j, j);
      const double det = dj * dj - di * di;
      if (std::abs(det) <= 1e-14 * (di * di + dj * dj))
        throw Error(ErrorKind::SingularPhi, "two-polar rates need distinct invariants");
      Lam(i, j) = (dj * M(i, j) + di * M(j, i)) / det;
      The(i, j) = (di * M(i, j) + dj * M(j, i)) / det;
      Lam(j, i) = -Lam(i, j);
      The(j, i) = -The(i, j);
    }
  TwoPolarRates r;
  r.L_dot = tp.L * Lam;
  r.D_dot = Dd;
  r.Rm_dot = tp.Rm * The;
  return r;
}

MatX orthogonal_retraction(const MatX& phi) { return polar(phi).U; }

MatX rotation2(double a) {
  MatX m(2, 2);
  m << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  return m;
}

}  // namespace cb
