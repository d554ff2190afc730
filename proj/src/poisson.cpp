#include "curvedbody/poisson.hpp"

#include "curvedbody/parallel.hpp"
#include "curvedbody/su2.hpp"

#include <cmath>
#include <deque>
#include <numbers>

namespace cb::poisson {

namespace {

constexpr double kPi = std::numbers::pi;

double delta(int a, int b) { return a == b ? 1.0 : 0.0; }

}  // namespace

double numeric_bracket(const PhaseFn& f, const PhaseFn& g, const VecX& z, numdiff::Step step) {
  if (z.size() % 2 != 0) throw Error(ErrorKind::DimensionMismatch, "phase point needs dim q = dim p");
  const int N = static_cast<int>(z.size() / 2);
  const VecX df = numdiff::gradient(f, z, step);
  const VecX dg = numdiff::gradient(g, z, step);
  return df.head(N).dot(dg.tail(N)) - df.tail(N).dot(dg.head(N));
}

VecX pack(const FrameBundlePoint& s) {
  const int n = static_cast<int>(s.x.size());
  const int N = n + n * n;
  VecX z(2 * N);
  z.segment(0, n) = s.x;
  z.segment(n, n * n) = Eigen::Map<const VecX>(s.e.data(), n * n);
  z.segment(N, n) = s.p;
  z.segment(N + n, n * n) = Eigen::Map<const VecX>(s.pe.data(), n * n);
  return z;
}

FrameBundlePoint unpack(const VecX& z, int n) {
  const int N = n + n * n;
  if (z.size() != 2 * N) throw Error(ErrorKind::DimensionMismatch, "phase point does not match the frame bundle");
  FrameBundlePoint s;
  s.x = z.segment(0, n);
  s.e = Eigen::Map<const MatX>(z.data() + n, n, n);
  s.p = z.segment(N, n);
  s.pe = Eigen::Map<const MatX>(z.data() + N + n, n, n);
  return s;
}

FrameBundleFunctions::FrameBundleFunctions(Geometry geometry) : geometry_(std::move(geometry)) {}

VecX FrameBundleFunctions::P_all(const FrameBundlePoint& s) const {
  const int n = this->n();
  const Tensor3d G = geometry_.gamma(s.x);
  // Σ^j_k = e^j_A p^A_k
  const MatX Sig = s.e * s.pe.transpose();
  VecX P = s.p;
  for (int i = 0; i < n; ++i) {
    double acc = 0;
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) acc += Sig(j, k) * G(k, j, i);
    P(i) -= acc;
  }
  return P;
}

PhaseFunction FrameBundleFunctions::x(int i) const {
  const int n = this->n();
  return {"x^" + std::to_string(i + 1), [n, i](const VecX& z) { return unpack(z, n).x(i); }};
}

PhaseFunction FrameBundleFunctions::e(int i, int A) const {
  const int n = this->n();
  return {"e^" + std::to_string(i + 1) + "_" + std::to_string(A + 1),
          [n, i, A](const VecX& z) { return unpack(z, n).e(i, A); }};
}

PhaseFunction FrameBundleFunctions::p_canonical(int i) const {
  const int n = this->n();
  return {"p_" + std::to_string(i + 1), [n, i](const VecX& z) { return unpack(z, n).p(i); }};
}

PhaseFunction FrameBundleFunctions::P(int i) const {
  const int n = this->n();
  return {"P_" + std::to_string(i + 1), [this, n, i](const VecX& z) { return P_all(unpack(z, n))(i); }};
}

PhaseFunction FrameBundleFunctions::PA(int A, int i) const {
  const int n = this->n();
  return {"P^" + std::to_string(A + 1) + "_" + std::to_string(i + 1),
          [n, A, i](const VecX& z) { return unpack(z, n).pe(i, A); }};
}

PhaseFunction FrameBundleFunctions::Sigma(int i, int j) const {
  const int n = this->n();
  return {"Sigma^" + std::to_string(i + 1) + "_" + std::to_string(j + 1), [n, i, j](const VecX& z) {
            const auto s = unpack(z, n);
            return s.e.row(i).dot(s.pe.row(j));
          }};
}

PhaseFunction FrameBundleFunctions::SigmaHat(int A, int B) const {
  const int n = this->n();
  return {"SigmaHat^" + std::to_string(A + 1) + "_" + std::to_string(B + 1), [n, A, B](const VecX& z) {
            const auto s = unpack(z, n);
            return s.pe.col(A).dot(s.e.col(B));
          }};
}

PhaseFunction FrameBundleFunctions::Phat(int A) const {
  const int n = this->n();
  return {"Phat_" + std::to_string(A + 1), [this, n, A](const VecX& z) {
            const auto s = unpack(z, n);
            return P_all(s).dot(s.e.col(A));
          }};
}

std::vector<PhaseFunction> FrameBundleFunctions::builtins() const {
  const int n = this->n();
  std::vector<PhaseFunction> out;
  for (int i = 0; i < n; ++i) out.push_back(x(i));
  for (int i = 0; i < n; ++i) out.push_back(P(i));
  for (int i = 0; i < n; ++i) out.push_back(Phat(i));
  for (int i = 0; i < n; ++i)
    for (int A = 0; A < n; ++A) {
      out.push_back(e(i, A));
      out.push_back(PA(A, i));
      out.push_back(Sigma(i, A));
      out.push_back(SigmaHat(i, A));
    }
  return out;
}

bool BracketReport::pass() const {
  for (const auto& r : rows)
    if (!r.pass) return false;
  return true;
}

VecX sample_state(const Geometry& geo, std::mt19937_64& rng) {
  const Chart& c = geo.chart();
  const int n = c.dim;
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  FrameBundlePoint s;
  s.x = VecX(n);
  switch (c.kind) {
    case ChartKind::Sphere2:
      s.x << c.R * kPi * (0.5 + 0.3 * unit(rng)), unit(rng);
      break;
    case ChartKind::Pseudosphere2:
      s.x << c.R * (1.1 + 0.9 * unit(rng)), unit(rng);
      break;
    case ChartKind::Torus2:
      s.x << kPi * unit(rng), unit(rng);
      break;
    case ChartKind::Sphere3: {
      Vec3 d(unit(rng), unit(rng), unit(rng));
      while (d.norm() < 0.1) d = Vec3(unit(rng), unit(rng), unit(rng));
      s.x = d.normalized() * c.R * kPi * (0.45 + 0.35 * unit(rng));
      break;
    }
    default:
      for (int i = 0; i < n; ++i) s.x(i) = unit(rng);
  }
  do {
    s.e = MatX::Identity(n, n);
    for (int i = 0; i < n; ++i)
      for (int A = 0; A < n; ++A) s.e(i, A) += 0.3 * unit(rng);
  } while (s.e.determinant() < 0.3);
  s.p = VecX(n);
  s.pe = MatX(n, n);
  for (int i = 0; i < n; ++i) s.p(i) = unit(rng);
  for (int i = 0; i < n; ++i)
    for (int A = 0; A < n; ++A) s.pe(i, A) = unit(rng);
  return pack(s);
}

Geometry torsion_test_geometry() {
  return Geometry::riemann_cartan(flat(3), [](const VecX& x) {
    Tensor3d S(3);
    const double a = 0.3 * std::cos(x(1)) + 0.1 * x(2);
    const double b = 0.2 * x(0);
    const double c = 0.15 * std::sin(x(0) + x(2));
    S(0, 1, 2) = a;
    S(0, 2, 1) = -a;
    S(1, 2, 0) = b;
    S(1, 0, 2) = -b;
    S(2, 0, 1) = c;
    S(2, 1, 0) = -c;
    S(0, 0, 1) = 0.1 * x(1);
    S(0, 1, 0) = -0.1 * x(1);
    return S;
  });
}

namespace {

// Accumulates the maximum deviation of one table row across samples.
struct RowAccumulator {
  std::string name;
  double tol;
  double max_err = 0;
  long evals = 0;
  void add(double numeric, double expected) {
    max_err = std::max(max_err, std::abs(numeric - expected));
    ++evals;
  }
  TableRow row() const { return {name, max_err, tol, evals, max_err <= tol}; }
};

struct TableSample {
  std::deque<RowAccumulator> rows;
};

// Co-moving components of curvature and torsion: ℛ̂^D_CAB and Ŝ^C_AB in the frame e.
struct BodyGeometry {
  Tensor4d R;
  Tensor3d S;
};

BodyGeometry body_geometry(const Geometry& geo, const FrameBundlePoint& s) {
  const int n = geo.dim();
  const Tensor4d Rc = geo.curvature(s.x);
  const Tensor3d Sc = geo.torsion(s.x);
  const MatX e = s.e, ei = s.e.inverse();
  BodyGeometry b{Tensor4d(n), Tensor3d(n)};
  for (int D = 0; D < n; ++D)
    for (int C = 0; C < n; ++C)
      for (int A = 0; A < n; ++A)
        for (int B = 0; B < n; ++B) {
          double acc = 0;
          for (int l = 0; l < n; ++l)
            for (int k = 0; k < n; ++k)
              for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) acc += ei(D, l) * Rc(l, k, i, j) * e(k, C) * e(i, A) * e(j, B);
          b.R(D, C, A, B) = acc;
        }
  for (int C = 0; C < n; ++C) {
    MatX sc = MatX::Zero(n, n);
    for (int i = 0; i < n; ++i) sc += ei(C, i) * Sc.slice(i);
    b.S.slice(C) = e.transpose() * sc * e;
  }
  return b;
}

TableSample evaluate_tables(const FrameBundleFunctions& F, const VecX& z, double tol) {
  const int n = F.n();
  const Geometry& geo = F.geometry();
  const FrameBundlePoint s = unpack(z, n);
  const Tensor3d G = geo.gamma(s.x);
  const Tensor4d Rc = geo.curvature(s.x);
  const VecX P = F.P_all(s);
  const MatX Sig = s.e * s.pe.transpose();        // Σ^i_j
  const MatX SigH = s.pe.transpose() * s.e;       // Σ̂^A_B
  const VecX Ph = s.e.transpose() * P;            // P̂_A
  const BodyGeometry bg = body_geometry(geo, s);
  auto br = [&](const PhaseFunction& f, const PhaseFunction& g) { return numeric_bracket(f.eval, g.eval, z); };

  TableSample out;
  auto row = [&](const std::string& name) -> RowAccumulator& {
    out.rows.push_back({name, tol});
    return out.rows.back();
  };

  {
    auto& r1 = row("{x^i, x^j} = 0");
    auto& r2 = row("{x^i, P_j} = delta^i_j");
    auto& r3 = row("{x^i, e^j_A} = 0");
    auto& r4 = row("{x^i, P^A_j} = 0");
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        r1.add(br(F.x(i), F.x(j)), 0);
        r2.add(br(F.x(i), F.P(j)), delta(i, j));
        r4.add(br(F.x(i), F.PA(j, i)), 0);
        for (int A = 0; A < n; ++A) r3.add(br(F.x(i), F.e(j, A)), 0);
      }
  }
  {
    auto& r5 = row("{e^i_A, e^j_B} = 0");
    auto& r6 = row("{e^i_A, P^B_j} = delta^i_j delta^B_A");
    auto& r7 = row("{P^A_i, P^B_j} = 0");
    for (int i = 0; i < n; ++i)
      for (int A = 0; A < n; ++A)
        for (int j = 0; j < n; ++j)
          for (int B = 0; B < n; ++B) {
            r5.add(br(F.e(i, A), F.e(j, B)), 0);
            r6.add(br(F.e(i, A), F.PA(B, j)), delta(i, j) * delta(A, B));
            r7.add(br(F.PA(A, i), F.PA(B, j)), 0);
          }
  }
  {
    auto& r8 = row("{P_i, P_j} = Sigma^k_l R^l_kij");
    auto& r9 = row("{P_i, e^j_A} = Gamma^j_ki e^k_A");
    auto& r10 = row("{P_i, P^A_j} = -Gamma^k_ji P^A_k");
    auto& r13 = row("{P_i, Sigma^k_j} = Sigma^l_j Gamma^k_li - Sigma^k_l Gamma^l_ji");
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double expect = 0;
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) expect += Sig(k, l) * Rc(l, k, i, j);
        r8.add(br(F.P(i), F.P(j)), expect);
        for (int A = 0; A < n; ++A) {
          double e9 = 0, e10 = 0;
          for (int k = 0; k < n; ++k) {
            e9 += G(j, k, i) * s.e(k, A);
            e10 -= G(k, j, i) * s.pe(k, A);
          }
          r9.add(br(F.P(i), F.e(j, A)), e9);
          r10.add(br(F.P(i), F.PA(A, j)), e10);
        }
        for (int k = 0; k < n; ++k) {
          double e13 = 0;
          for (int m = 0; m < n; ++m) e13 += Sig(m, j) * G(k, m, i) - Sig(k, m) * G(m, j, i);
          r13.add(br(F.P(i), F.Sigma(k, j)), e13);
        }
      }
  }
  {
    auto& r11 = row("{Sigma^i_j, Sigma^k_l} = delta^i_l Sigma^k_j - delta^k_j Sigma^i_l");
    auto& r12 = row("{Sigma^i_j, x^k} = 0");
    auto& r14 = row("{SigmaHat^A_B, SigmaHat^C_D} = delta^C_B SigmaHat^A_D - delta^A_D SigmaHat^C_B");
    auto& r19 = row("{Sigma^i_j, SigmaHat^A_B} = 0");
    auto& r20 = row("{Sigma^i_j, det e} = -delta^i_j det e");
    const PhaseFunction det{"det e", [n](const VecX& y) { return unpack(y, n).e.determinant(); }};
    const double det_e = s.e.determinant();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          r12.add(br(F.Sigma(i, j), F.x(k)), 0);
          if (k == 0) r20.add(br(F.Sigma(i, j), det), -delta(i, j) * det_e);
          for (int l = 0; l < n; ++l) {
            r11.add(br(F.Sigma(i, j), F.Sigma(k, l)), delta(i, l) * Sig(k, j) - delta(k, j) * Sig(i, l));
            r14.add(br(F.SigmaHat(i, j), F.SigmaHat(k, l)), delta(k, j) * SigH(i, l) - delta(i, l) * SigH(k, j));
            r19.add(br(F.Sigma(i, j), F.SigmaHat(k, l)), 0);
          }
        }
  }
  {
    auto& r15 = row("{SigmaHat^A_B, Phat_C} = -delta^A_C Phat_B");
    auto& r16 = row("{x^i, Phat_A} = e^i_A");
    auto& r17 = row("{Phat_A, Phat_B} = SigmaHat^C_D R^D_CAB - 2 Phat_C S^C_AB");
    auto& r18 = row("{Phat_A, e^i_B} = e^k_A Gamma^i_jk e^j_B");
    for (int A = 0; A < n; ++A)
      for (int B = 0; B < n; ++B) {
        for (int C = 0; C < n; ++C) r15.add(br(F.SigmaHat(A, B), F.Phat(C)), -delta(A, C) * Ph(B));
        r16.add(br(F.x(A), F.Phat(B)), s.e(A, B));
        double e17 = 0;
        for (int C = 0; C < n; ++C) {
          for (int D = 0; D < n; ++D) e17 += SigH(C, D) * bg.R(D, C, A, B);
          e17 -= 2 * Ph(C) * bg.S(C, A, B);
        }
        r17.add(br(F.Phat(A), F.Phat(B)), e17);
        for (int i = 0; i < n; ++i) {
          double e18 = 0;
          for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) e18 += s.e(k, A) * G(i, j, k) * s.e(j, B);
          r18.add(br(F.Phat(A), F.e(i, B)), e18);
        }
      }
  }
  {
    // Defining relations of the built-ins, evaluated pointwise.
    auto& rd = row("definitions P, Sigma, SigmaHat, Phat");
    rd.tol = 1e-12;
    for (int i = 0; i < n; ++i) {
      double expect = s.p(i);
      for (int j = 0; j < n; ++j)
        for (int A = 0; A < n; ++A)
          for (int k = 0; k < n; ++k) expect -= s.e(j, A) * s.pe(k, A) * G(k, j, i);
      rd.add(F.P(i).eval(z), expect);
      rd.add(F.Phat(i).eval(z), P.dot(s.e.col(i)));
      for (int j = 0; j < n; ++j) {
        rd.add(F.Sigma(i, j).eval(z), Sig(i, j));
        rd.add(F.SigmaHat(i, j).eval(z), SigH(i, j));
      }
    }
  }
  return out;
}

void merge(std::vector<RowAccumulator>& into, const std::deque<RowAccumulator>& from) {
  if (into.empty()) {
    into.assign(from.begin(), from.end());
    return;
  }
  for (size_t k = 0; k < into.size(); ++k) {
    into[k].max_err = std::max(into[k].max_err, from[k].max_err);
    into[k].evals += from[k].evals;
  }
}

}  // namespace

BracketReport verify_tables(const Geometry& geo, int samples, unsigned seed, double tol, int jacobi_triples,
                            double jacobi_tol, int threads) {
  const FrameBundleFunctions F(geo);
  std::mt19937_64 rng(seed);
  std::vector<VecX> states;
  for (int k = 0; k < samples; ++k) states.push_back(sample_state(geo, rng));

  std::vector<TableSample> results(samples);
  parallel_for(samples, threads, [&](int k) { results[k] = evaluate_tables(F, states[k], tol); });
  std::vector<RowAccumulator> rows;
  for (const auto& r : results) merge(rows, r.rows);

  // Antisymmetry, Leibniz and Jacobi on random triples drawn from the built-ins.
  const auto fns = F.builtins();
  std::uniform_int_distribution<size_t> pick(0, fns.size() - 1);
  struct Triple {
    size_t a, b, c;
    VecX z;
  };
  std::vector<Triple> triples;
  for (int t = 0; t < jacobi_triples; ++t) triples.push_back({pick(rng), pick(rng), pick(rng), sample_state(geo, rng)});
  std::vector<double> anti(triples.size()), leib(triples.size()), jac(triples.size());
  parallel_for(static_cast<int>(triples.size()), threads, [&](int t) {
    const auto& tr = triples[t];
    const PhaseFn& f = fns[tr.a].eval;
    const PhaseFn& g = fns[tr.b].eval;
    const PhaseFn& h = fns[tr.c].eval;
    const VecX& z = tr.z;
    anti[t] = std::abs(numeric_bracket(f, g, z) + numeric_bracket(g, f, z));
    const PhaseFn gh = [&](const VecX& y) { return g(y) * h(y); };
    leib[t] = std::abs(numeric_bracket(f, gh, z) - numeric_bracket(f, g, z) * h(z) - g(z) * numeric_bracket(f, h, z));
    constexpr auto Q = numdiff::Step::Quint;
    auto inner = [&](const PhaseFn& u, const PhaseFn& v) -> PhaseFn {
      return [&u, &v](const VecX& y) { return numeric_bracket(u, v, y, Q); };
    };
    jac[t] = std::abs(numeric_bracket(f, inner(g, h), z, Q) + numeric_bracket(g, inner(h, f), z, Q) +
                      numeric_bracket(h, inner(f, g), z, Q));
  });
  RowAccumulator ra{"antisymmetry {f,g} + {g,f} = 0", 1e-8}, rl{"Leibniz {f,gh} = {f,g}h + g{f,h}", 1e-8},
      rj{"Jacobi identity", jacobi_tol};
  for (size_t t = 0; t < triples.size(); ++t) {
    ra.add(anti[t], 0);
    rl.add(leib[t], 0);
    rj.add(jac[t], 0);
  }
  rows.push_back(ra);
  rows.push_back(rl);
  rows.push_back(rj);

  BracketReport rep;
  rep.chart = geo.chart().name() + (geo.is_levi_civita() ? "" : "+connection");
  rep.seed = seed;
  rep.samples = samples;
  for (const auto& r : rows) rep.rows.push_back(r.row());
  return rep;
}

BracketReport verify_su2_tables(double R, int samples, unsigned seed, double tol, double m, double I) {
  const su2::BodyParams bp{m, I, R};
  su2::validate(bp);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  // Phase point (r̄, ϰ̄; p_r̄, p_ϰ̄).
  auto S_left = [R](const VecX& z) { return Vec3(su2::left_legs(R, z.head<3>()).transpose() * z.segment<3>(6)); };
  auto S_right = [R](const VecX& z) { return Vec3(su2::right_legs(R, z.head<3>()).transpose() * z.segment<3>(6)); };
  auto Srl_left = [](const VecX& z) {
    return Vec3(su2::coframe_matrix(z.segment<3>(3)).inverse().transpose() * z.segment<3>(9));
  };
  auto Srl_right = [](const VecX& z) {
    return Vec3(su2::coframe_matrix(-z.segment<3>(3)).inverse().transpose() * z.segment<3>(9));
  };
  auto comp = [](auto f, int a) -> PhaseFn { return [f, a](const VecX& z) { return f(z)(a); }; };
  const PhaseFn casimir = [Srl_left](const VecX& z) { return Srl_left(z).squaredNorm(); };
  const PhaseFn hamiltonian = [=](const VecX& z) {
    return su2::kinetic_hamiltonian({S_left(z), Srl_left(z)}, bp);
  };

  RowAccumulator rows[] = {
      {"{lS_A, lS_B} = (2/R) eps_ABC lS_C", tol},
      {"{rS_A, rS_B} = -(2/R) eps_ABC rS_C", tol},
      {"{lS_A, rS_B} = 0", tol},
      {"{lSrl_A, lSrl_B} = eps_ABC lSrl_C", tol},
      {"{rSrl_A, rSrl_B} = -eps_ABC rSrl_C", tol},
      {"{lS_A, lSrl_B} = 0 (drive and relative in involution)", 1e-8},
      {"{|lSrl|^2, lSrl_A} = 0 (Casimir)", 1e-8},
      {"{lS, T} = (2/mR^2) lSrl x lS", tol},
      {"{lSrl, T} = (1/mR) lS x lSrl", tol},
  };
  for (int k = 0; k < samples; ++k) {
    VecX z(12);
    Vec3 d(unit(rng), unit(rng), unit(rng));
    while (d.norm() < 0.1) d = Vec3(unit(rng), unit(rng), unit(rng));
    z.head<3>() = d.normalized() * R * kPi * (0.45 + 0.35 * unit(rng));
    Vec3 kap(unit(rng), unit(rng), unit(rng));
    z.segment<3>(3) = kap * 1.5;
    for (int i = 6; i < 12; ++i) z(i) = unit(rng);
    const Vec3 SL = S_left(z), SR = S_right(z), RL = Srl_left(z), RR = Srl_right(z);
    const su2::MomentumPair flow = su2::flow_rhs({SL, RL}, bp);
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        double eL = 0, eR = 0, fL = 0, fR = 0;
        for (int c = 0; c < 3; ++c) {
          eL += (2 / R) * epsilon3(a, b, c) * SL(c);
          eR -= (2 / R) * epsilon3(a, b, c) * SR(c);
          fL += epsilon3(a, b, c) * RL(c);
          fR -= epsilon3(a, b, c) * RR(c);
        }
        rows[0].add(numeric_bracket(comp(S_left, a), comp(S_left, b), z), eL);
        rows[1].add(numeric_bracket(comp(S_right, a), comp(S_right, b), z), eR);
        rows[2].add(numeric_bracket(comp(S_left, a), comp(S_right, b), z), 0);
        rows[3].add(numeric_bracket(comp(Srl_left, a), comp(Srl_left, b), z), fL);
        rows[4].add(numeric_bracket(comp(Srl_right, a), comp(Srl_right, b), z), fR);
        rows[5].add(numeric_bracket(comp(S_left, a), comp(Srl_left, b), z), 0);
      }
      rows[6].add(numeric_bracket(casimir, comp(Srl_left, a), z), 0);
      rows[7].add(numeric_bracket(comp(S_left, a), hamiltonian, z), flow.S(a));
      rows[8].add(numeric_bracket(comp(Srl_left, a), hamiltonian, z), flow.Srl(a));
    }
  }
  BracketReport rep;
  rep.chart = "sphere3-su2";
  rep.seed = seed;
  rep.samples = samples;
  for (const auto& r : rows) rep.rows.push_back(r.row());
  return rep;
}

}  // namespace cb::poisson
