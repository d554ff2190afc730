#include "curvedbody/su2.hpp"

#include "doctest.h"

#include <cmath>
#include <random>

using namespace cb;
using namespace cb::su2;

namespace {

constexpr double kPi = 3.14159265358979323846;

Mat3 hat(const Vec3& w) {
  Mat3 m;
  m << 0, -w(2), w(1), w(2), 0, -w(0), -w(1), w(0), 0;
  return m;
}

Mat3 series_exp(const Mat3& a) {
  Mat3 sum = Mat3::Identity(), term = Mat3::Identity();
  for (int n = 1; n < 40; ++n) {
    term = term * a / n;
    sum += term;
  }
  return sum;
}

Mat2c series_exp(const Mat2c& a) {
  Mat2c sum = Mat2c::Identity(), term = Mat2c::Identity();
  for (int n = 1; n < 40; ++n) {
    term = term * a / double(n);
    sum += term;
  }
  return sum;
}

Mat2c pauli_dot(const Vec3& k) {
  using C = std::complex<double>;
  Mat2c m;
  m << C(k(2), 0), C(k(0), -k(1)), C(k(0), k(1)), C(-k(2), 0);
  return m;
}

using Legs = Mat3 (*)(double, const Vec3&);

Vec3 lie_bracket(Legs f, int A, Legs g, int B, double R, const Vec3& r) {
  const double h = 1e-5;
  const Mat3 X = f(R, r), Y = g(R, r);
  Vec3 out = Vec3::Zero();
  for (int j = 0; j < 3; ++j) {
    const Vec3 e = h * Vec3::Unit(j);
    const Vec3 dY = (g(R, r + e).col(B) - g(R, r - e).col(B)) / (2 * h);
    const Vec3 dX = (f(R, r + e).col(A) - f(R, r - e).col(A)) / (2 * h);
    out += X(j, A) * dY - Y(j, B) * dX;
  }
  return out;
}

double levi_civita(int a, int b, int c) { return 0.5 * (a - b) * (b - c) * (c - a); }

Vec3 random_vec(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return Vec3(u(rng), u(rng), u(rng));
}

}  // namespace

TEST_CASE("exponential maps") {
  CHECK((exp_su2(Vec3::Zero()) - Mat2c::Identity()).norm() < 1e-15);
  CHECK((exp_so3(Vec3::Zero()) - Mat3::Identity()).norm() < 1e-15);
  CHECK((exp_su2(Vec3(0, 2 * kPi, 0)) + Mat2c::Identity()).norm() < 1e-14);
  CHECK((exp_so3(Vec3(0, 2 * kPi, 0)) - Mat3::Identity()).norm() < 1e-14);
  CHECK((exp_so3(Vec3(0, 0, kPi / 2)) * Vec3::UnitX() - Vec3::UnitY()).norm() < 1e-15);

  std::mt19937_64 rng(5);
  const std::complex<double> minus_half_i(0, -0.5);
  for (int n = 0; n < 20; ++n) {
    const Vec3 k = random_vec(rng, 3.0);
    CHECK((exp_so3(k) - series_exp(hat(k))).norm() < 1e-12);
    CHECK((exp_su2(k) - series_exp(Mat2c(minus_half_i * pauli_dot(k)))).norm() < 1e-12);
    CHECK(std::abs(exp_su2(k).determinant() - 1.0) < 1e-14);
    CHECK((to_matrix(exp_su2_quat(k)) - exp_su2(k)).norm() < 1e-14);
    CHECK(from_matrix(exp_su2(k)).coeffs().isApprox(exp_su2_quat(k).coeffs(), 1e-14));
  }
}

TEST_CASE("double cover") {
  std::mt19937_64 rng(6);
  for (int n = 0; n < 20; ++n) {
    const Vec3 a = random_vec(rng, 2.5), b = random_vec(rng, 2.5);
    const Quat ua = exp_su2_quat(a), ub = exp_su2_quat(b);
    CHECK((project_su2_to_so3(ua) - exp_so3(a)).norm() < 1e-13);
    CHECK((project_su2_to_so3(ua * ub) - exp_so3(a) * exp_so3(b)).norm() < 1e-13);
    const Quat minus(-ua.w(), -ua.x(), -ua.y(), -ua.z());
    CHECK((project_su2_to_so3(minus) - project_su2_to_so3(ua)).norm() < 1e-14);
    CHECK((project_su2_to_so3(exp_su2(a)) - exp_so3(a)).norm() < 1e-13);
    CHECK((exp_su2(a) * exp_su2(-a) - Mat2c::Identity()).norm() < 1e-14);
  }
}

TEST_CASE("coframe matrix gives the spatial angular velocity") {
  std::mt19937_64 rng(7);
  const double h = 1e-6;
  for (int n = 0; n < 10; ++n) {
    const Vec3 k = random_vec(rng, 2.0), kd = random_vec(rng, 1.0);
    const Mat3 d = (exp_so3(k + h * kd) - exp_so3(k - h * kd)) / (2 * h);
    const Mat3 w = d * exp_so3(k).transpose();
    CHECK((Vec3(w(2, 1), w(0, 2), w(1, 0)) - coframe_matrix(k) * kd).norm() < 1e-8);
  }
  CHECK((coframe_matrix(Vec3::Zero()) - Mat3::Identity()).norm() < 1e-15);
}

TEST_CASE("left and right frames on the three-sphere") {
  std::mt19937_64 rng(8);
  for (double R : {0.7, 1.3, 4.0}) {
    for (int n = 0; n < 5; ++n) {
      const Vec3 r = random_vec(rng, 0.8 * R);
      CHECK((left_coframe(R, r) * left_legs(R, r) - Mat3::Identity()).norm() < 1e-13);
      CHECK((right_coframe(R, r) * right_legs(R, r) - Mat3::Identity()).norm() < 1e-13);
      for (int A = 0; A < 3; ++A)
        for (int B = 0; B < 3; ++B) {
          const Vec3 cl = left_coframe(R, r) * lie_bracket(left_legs, A, left_legs, B, R, r);
          const Vec3 cr = right_coframe(R, r) * lie_bracket(right_legs, A, right_legs, B, R, r);
          for (int C = 0; C < 3; ++C) {
            CHECK(cl(C) == doctest::Approx(-(2 / R) * levi_civita(A, B, C)).epsilon(1e-7));
            CHECK(cr(C) == doctest::Approx((2 / R) * levi_civita(A, B, C)).epsilon(1e-7));
          }
          CHECK(lie_bracket(left_legs, A, right_legs, B, R, r).norm() < 1e-8);
        }
    }
  }
}

TEST_CASE("inner automorphism generators") {
  const Vec3 r(0.3, -0.2, 0.5);
  const Mat3 D = inner_generators(r);
  for (int A = 0; A < 3; ++A) CHECK((D.col(A) - Vec3::Unit(A).cross(r)).norm() < 1e-15);
}

TEST_CASE("large radius approaches flat space") {
  const Vec3 r(0.3, -0.4, 0.2);
  // The frames rotate by O(|r|/R) relative to the Cartesian axes, the metric deviates at O(|r|²/R²).
  double prev_legs = 0, prev_metric = 0;
  for (double R : {1e1, 1e2, 1e3, 1e4}) {
    const double legs = (left_legs(R, r) - Mat3::Identity()).norm();
    const double metric = (s3_metric(R, r) - Mat3::Identity()).norm();
    if (prev_legs > 0) {
      CHECK(prev_legs / legs == doctest::Approx(10.0).epsilon(0.05));
      CHECK(prev_metric / metric == doctest::Approx(100.0).epsilon(0.05));
    }
    prev_legs = legs;
    prev_metric = metric;
  }
  CHECK(prev_legs < 1e-4);
  CHECK(prev_metric < 1e-8);
}

TEST_CASE("metric of the three-sphere from three constructions") {
  for (double R : {0.5, 1.0, 2.5}) {
    const S3MetricReport rep = s3_metric_check(R, 50, 9);
    CHECK(rep.samples == 50);
    CHECK(rep.left_vs_right < 1e-10);
    CHECK(rep.left_vs_closed_form < 1e-10);
    CHECK(rep.embedding_vs_closed_form < 1e-10);
  }
  const Vec3 r(0.2, 0.1, -0.3);
  CHECK(s3_embedding(1.7, r).norm() == doctest::Approx(1.7).epsilon(1e-14));
}

TEST_CASE("Legendre map of the S3 gyroscope") {
  const BodyParams p{1.2, 0.5, 1.5};
  std::mt19937_64 rng(10);
  for (int n = 0; n < 10; ++n) {
    const OmegaPair w{random_vec(rng, 1.0), random_vec(rng, 1.0)};
    const double T = 0.5 * (p.m + p.I / (p.R * p.R)) * w.Omega.squaredNorm() - (p.I / p.R) * w.Omega.dot(w.Omega_rl) +
                     0.5 * p.I * w.Omega_rl.squaredNorm();
    CHECK(kinetic_energy(w, p) == doctest::Approx(T).epsilon(1e-14));
    const MomentumPair s = s3_legendre(w, p);
    CHECK(kinetic_hamiltonian(s, p) == doctest::Approx(T).epsilon(1e-12));
    const OmegaPair back = s3_legendre_inverse(s, p);
    CHECK((back.Omega - w.Omega).norm() < 1e-12);
    CHECK((back.Omega_rl - w.Omega_rl).norm() < 1e-12);
    // Momenta are the gradients of T in the velocities.
    const double h = 1e-6;
    for (int A = 0; A < 3; ++A) {
      OmegaPair a = w, b = w;
      a.Omega(A) += h;
      b.Omega(A) -= h;
      CHECK((kinetic_energy(a, p) - kinetic_energy(b, p)) / (2 * h) == doctest::Approx(s.S(A)).epsilon(1e-8));
    }
  }
  CHECK_THROWS_AS(validate({0.0, 1.0, 1.0}), Error);
  CHECK_THROWS_AS(validate({1.0, 1.0, -1.0}), Error);
}

TEST_CASE("geodetic momentum flow is a rigid rotation about a conserved axis") {
  const BodyParams p{1.0, 0.6, 1.3};
  const MomentumPair s0{Vec3(0.4, -0.3, 0.8), Vec3(-0.2, 0.5, 0.1)};
  const double dt = 1e-3;
  const long steps = 100000;
  const FlowResult res = momentum_flow(s0, p, dt, steps, 10000);
  CHECK(res.max_rel_drift_S_norm < 1e-8);
  CHECK(res.max_rel_drift_Srl_norm < 1e-8);
  CHECK(res.max_rel_drift_dot < 1e-8);
  CHECK(res.max_rel_drift_conserved < 1e-8);
  CHECK(res.max_angle_drift < 1e-8);
  CHECK(res.max_normal_angle_drift < 1e-8);
  REQUIRE(res.samples.size() == 11);

  const Vec3 w = 0.5 * p.R * s0.S + s0.Srl;
  for (const auto& smp : res.samples) {
    const Vec3 S = exp_so3((2 * smp.t / (p.m * p.R * p.R)) * w) * s0.S;
    CHECK((smp.s.S - S).norm() < 1e-8);
    CHECK((smp.s.Srl - (w - 0.5 * p.R * S)).norm() < 1e-8);
  }
}

TEST_CASE("fixed points and the interference switch") {
  const BodyParams p{1.0, 0.6, 1.3};
  const MomentumPair parallel{Vec3(0.3, 0.6, -0.2), Vec3(-0.6, -1.2, 0.4)};
  const MomentumPair d = flow_rhs(parallel, p);
  CHECK(d.S.norm() < 1e-15);
  CHECK(d.Srl.norm() < 1e-15);
  const FlowResult fixed = momentum_flow(parallel, p, 1e-2, 1000, 1000);
  CHECK((fixed.samples.back().s.S - parallel.S).norm() < 1e-14);

  const MomentumPair generic{Vec3(0.4, -0.3, 0.8), Vec3(-0.2, 0.5, 0.1)};
  const FlowResult frozen = momentum_flow(generic, p, 1e-2, 1000, 1000, 0.0);
  CHECK((frozen.samples.back().s.S - generic.S).norm() == 0.0);
  CHECK((frozen.samples.back().s.Srl - generic.Srl).norm() == 0.0);
  const FlowResult moving = momentum_flow(generic, p, 1e-2, 1000, 1000, 1.0);
  CHECK((moving.samples.back().s.S - generic.S).norm() > 0.1);

  const FlowConstants c = flow_constants(generic, p);
  CHECK(c.dot == doctest::Approx(generic.S.dot(generic.Srl)).epsilon(1e-15));
  CHECK((c.conserved - (0.65 * generic.S + generic.Srl)).norm() < 1e-15);
}
