#include "curvedbody/geometry.hpp"
#include "curvedbody/poisson.hpp"

#include "doctest.h"

#include <cmath>
#include <random>

using namespace cb;

namespace {

constexpr double kPi = 3.14159265358979323846;

VecX point(std::initializer_list<double> xs) {
  VecX v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

std::vector<Geometry> builtin_geometries() {
  return {Geometry(sphere2(1.3)), Geometry(pseudosphere2(0.8)), Geometry(torus2(2.5, 1.0)), Geometry(sphere3(1.1)),
          Geometry(flat(2)), Geometry(flat(3))};
}

}  // namespace

TEST_CASE("closed-form metrics of the built-in charts") {
  CHECK((metric_at(sphere2(1.0), point({kPi / 2, 0})) - MatX::Identity(2, 2)).norm() < 1e-15);
  CHECK((metric_at(flat(2), point({0.3, -4.0})) - MatX::Identity(2, 2)).norm() == 0.0);
  const MatX gt = metric_at(torus2(2.0, 1.0), point({0, 0}));
  CHECK(gt(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(gt(1, 1) == doctest::Approx(9.0).epsilon(1e-15));
  CHECK(gt(0, 1) == 0.0);
}

TEST_CASE("chart parameter and domain errors") {
  auto kind_of = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::IoError;
  };
  CHECK(kind_of([] { validate(sphere2(0.0)); }) == ErrorKind::BadParams);
  CHECK(kind_of([] { validate(torus2(1.0, 1.0)); }) == ErrorKind::BadParams);
  CHECK(kind_of([] { validate(torus2(0.5, 1.0)); }) == ErrorKind::BadParams);
  CHECK(kind_of([] { metric_at(sphere2(1.0), point({1e-9, 0.0})); }) == ErrorKind::SingularPoint);
  CHECK(kind_of([] { metric_at(sphere2(1.0), point({kPi - 1e-9, 0.0})); }) == ErrorKind::SingularPoint);
  CHECK(kind_of([] { metric_at(sphere2(1.0), point({0.5})); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("Levi-Civita symbols on the sphere at r = pi/4") {
  const Tensor3d G = levi_civita_at(sphere2(1.0), point({kPi / 4, 0.2}));
  CHECK(G(1, 0, 1) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(G(1, 1, 0) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(G(0, 1, 1) == doctest::Approx(-0.5).epsilon(1e-13));

  // Finite-difference oracle: Γ^r_φφ = −½ ∂_r g_φφ with g_φφ = sin² r.
  const double h = 1e-5, r = kPi / 4;
  const double dg = (std::pow(std::sin(r + h), 2) - std::pow(std::sin(r - h), 2)) / (2 * h);
  CHECK(G(0, 1, 1) == doctest::Approx(-0.5 * dg).epsilon(1e-9));
}

TEST_CASE("Levi-Civita symbols are symmetric and vanish on flat charts") {
  std::mt19937_64 rng(11);
  for (const auto& g : builtin_geometries()) {
    const VecX x = poisson::sample_state(g, rng).head(g.dim());
    const Tensor3d G = g.gamma(x);
    for (int i = 0; i < g.dim(); ++i) CHECK((G.slice(i) - G.slice(i).transpose()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(g.torsion(x).max_abs() < 1e-14);
  }
  CHECK(levi_civita_at(flat(3), point({1, 2, 3})).max_abs() == 0.0);
}

TEST_CASE("scalar curvature of sphere, pseudosphere and flat space") {
  std::mt19937_64 rng(5);
  const Geometry s(sphere2(2.0)), h(pseudosphere2(1.0));
  for (int k = 0; k < 100; ++k) {
    CHECK(s.scalar_curvature(poisson::sample_state(s, rng).head(2)) == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(h.scalar_curvature(poisson::sample_state(h, rng).head(2)) == doctest::Approx(-2.0).epsilon(1e-8));
  }
  const Tensor4d r = curvature_at(Geometry(flat(3)), point({0.1, 0.2, 0.3}));
  CHECK(r.max_abs() == 0.0);
}

TEST_CASE("curvature antisymmetries and metric compatibility at random points") {
  std::mt19937_64 rng(7);
  for (const auto& g : builtin_geometries()) {
    const int n = g.dim();
    double compat = 0, anti = 0, pair = 0;
    for (int k = 0; k < 100; ++k) {
      const VecX x = poisson::sample_state(g, rng).head(n);
      compat = std::max(compat, metric_compatibility_residual(g, x));
      if (k % 10) continue;
      const Tensor4d R = g.curvature(x);
      const MatX gm = g.metric(x);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
              anti = std::max(anti, std::abs(R(a, b, i, j) + R(a, b, j, i)));
              double lab = 0, lba = 0;
              for (int c = 0; c < n; ++c) {
                lab += gm(a, c) * R(c, b, i, j);
                lba += gm(b, c) * R(c, a, i, j);
              }
              pair = std::max(pair, std::abs(lab + lba));
            }
    }
    INFO(g.chart().name());
    CHECK(compat < 1e-9);
    CHECK(anti < 1e-9);
    CHECK(pair < 1e-7);
  }
}

TEST_CASE("large-radius limit approaches the flat polar connection") {
  // In polar coordinates the flat connection is Γ^φ_rφ = 1/r, Γ^r_φφ = −r, so that is the limit.
  const double r = 0.7;
  for (auto make : {&sphere2, &pseudosphere2}) {
    double previous = INFINITY;
    for (double R : {10.0, 100.0, 1000.0}) {
      const Tensor3d G = levi_civita_at(make(R), point({r, 0.0}));
      const double dev = std::max(std::abs(G(1, 0, 1) - 1 / r), std::abs(G(0, 1, 1) + r));
      CHECK(dev < previous);
      previous = dev;
    }
    CHECK(previous < 1e-6);
  }
}

TEST_CASE("black-box metric reproduces the analytic Christoffel symbols") {
  const double R = 1.4;
  const Chart box = custom(2, [R](const VecX& x) {
    MatX g = MatX::Identity(2, 2);
    g(1, 1) = std::pow(R * std::sin(x(0) / R), 2);
    return g;
  });
  const Chart box_t = custom(2, [](const VecX& x) {
    MatX g = MatX::Zero(2, 2);
    g(0, 0) = 1.0;
    g(1, 1) = std::pow(2.5 + std::cos(x(0)), 2);
    return g;
  });
  for (double r : {0.3, 1.0, 2.0}) {
    const VecX x = point({r, 0.4});
    const Tensor3d a = levi_civita_at(sphere2(R), x), b = levi_civita_at(box, x);
    const Tensor3d c = levi_civita_at(torus2(2.5, 1.0), x), d = levi_civita_at(box_t, x);
    for (int i = 0; i < 2; ++i) {
      CHECK((a.slice(i) - b.slice(i)).cwiseAbs().maxCoeff() < 1e-6);
      CHECK((c.slice(i) - d.slice(i)).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("torsion and contortion decomposition") {
  SUBCASE("Levi-Civita input has no torsion, contortion or difference tensor") {
    const auto tc = torsion_contortion_at(Geometry(sphere2(1.0)), point({1.0, 0.0}));
    CHECK(tc.torsion.max_abs() < 1e-15);
    CHECK(tc.contortion.max_abs() < 1e-15);
    CHECK(tc.difference.max_abs() < 1e-15);
  }
  SUBCASE("constant S^1_23 on flat R3") {
    const double c = 0.37;
    const auto torsion = [c](const VecX&) {
      Tensor3d S(3);
      S(0, 1, 2) = c;
      S(0, 2, 1) = -c;
      return S;
    };
    const Geometry rc = Geometry::riemann_cartan(flat(3), torsion);
    const auto tc = torsion_contortion_at(rc, point({0.1, 0.2, 0.3}));
    // Euclidean metric: K^i_jk = S^i_jk + S_jk^i + S_kj^i with lowered indices equal to raised ones.
    const Tensor3d S = torsion(VecX());
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) {
          const double want = S(i, j, k) + S(j, k, i) + S(k, j, i);
          CHECK(tc.contortion(i, j, k) == doctest::Approx(want).epsilon(1e-14));
          CHECK(tc.torsion(i, j, k) == doctest::Approx(S(i, j, k)).epsilon(1e-14));
        }
    CHECK(tc.reconstruction_residual < 1e-14);
    CHECK(tc.contortion_skew_residual < 1e-14);
    CHECK(metric_compatibility_residual(rc, point({0.1, 0.2, 0.3})) < 1e-14);
  }
  SUBCASE("arbitrary perturbed connection: difference tensor is Γ − {}") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    Tensor3d delta(2);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) delta(i, j, k) = u(rng);
    const Chart ch = sphere2(1.0);
    const Geometry g(ch, [ch, delta](const VecX& x) {
      Tensor3d G = levi_civita_at(ch, x);
      for (int i = 0; i < 2; ++i) G.slice(i) += delta.slice(i);
      return G;
    }, false);
    const auto tc = torsion_contortion_at(g, point({1.1, 0.2}));
    for (int i = 0; i < 2; ++i) CHECK((tc.difference.slice(i) - delta.slice(i)).cwiseAbs().maxCoeff() < 1e-14);
    for (int i = 0; i < 2; ++i)
      CHECK((tc.torsion.slice(i) - 0.5 * (delta.slice(i) - delta.slice(i).transpose())).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("covariant derivative along curves") {
  SUBCASE("flat chart gives the ordinary derivative") {
    const VecX rate = point({0.3, -0.2});
    const VecX d = covariant_derivative_along(Geometry(flat(2)), point({1, 2}), point({5, 6}), point({7, 8}), rate);
    CHECK((d - rate).norm() == 0.0);
  }
  SUBCASE("e_r moved along phi on the sphere picks up the phi component") {
    const VecX d = covariant_derivative_along(Geometry(sphere2(1.0)), point({kPi / 4, 0}), point({0, 1}),
                                              point({1, 0}), point({0, 0}));
    CHECK(d(0) == doctest::Approx(0.0));
    CHECK(d(1) == doctest::Approx(1.0).epsilon(1e-13));
  }
  SUBCASE("a vector parallel-transported along the equator has zero covariant derivative") {
    // Oracle: integrate dX/dt = −Γ(x(t)) X ẋ with small RK4 steps, then feed the
    // sampled solution and its numerical derivative back in.
    const Geometry g(sphere2(1.0));
    const auto rhs = [&](double t, const VecX& X) {
      const VecX x = point({kPi / 2, t}), v = point({0, 1});
      return VecX(-covariant_derivative_along(g, x, v, X, VecX::Zero(2)));
    };
    const double dt = 1e-4;
    VecX X = point({0.6, 0.8});
    std::vector<VecX> path{X};
    for (int k = 0; k < 10000; ++k) {
      const double t = k * dt;
      const VecX k1 = rhs(t, X), k2 = rhs(t + dt / 2, X + dt / 2 * k1), k3 = rhs(t + dt / 2, X + dt / 2 * k2),
                 k4 = rhs(t + dt, X + dt * k3);
      X += dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
      path.push_back(X);
    }
    const auto cb = covariant_derivative_callback(g);
    double worst = 0;
    for (int k = 1; k < 10000; k += 997) {
      const VecX rate = (path[k + 1] - path[k - 1]) / (2 * dt);
      worst = std::max(worst, cb(point({kPi / 2, k * dt}), point({0, 1}), path[k], rate).norm());
    }
    CHECK(worst < 1e-10);
  }
  CHECK_THROWS_AS(covariant_derivative_along(Geometry(flat(2)), point({1, 2}), point({1}), point({1, 1}), point({0, 0})),
                  Error);
}
