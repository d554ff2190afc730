// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "curvedbody/action_angle.hpp"
#include "curvedbody/dynamics.hpp"
#include "curvedbody/geometry.hpp"
#include "curvedbody/poisson.hpp"
#include "curvedbody/su2.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

using namespace cb;
namespace aa = cb::action_angle;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Pinned tolerances.
constexpr double kCurvatureRel = 1e-8;
constexpr double kCompatibility = 1e-9;
constexpr double kBracket = 1e-7;
constexpr double kJacobi = 1e-6;
constexpr double kPower = 1e-12;
constexpr double kEnergy = 1e-8;
constexpr double kCyclic = 1e-10;
constexpr double kConstraint = 1e-9;
constexpr double kResidue = 1e-6;
constexpr double kClosure = 1e-6;
constexpr double kControlFailShare = 0.8;
constexpr double kPeriod = 1e-4;
constexpr double kFlowDrift = 1e-8;
constexpr double kFlowMatch = 1e-6;
constexpr double kDualPath = 1e-10;

int threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

VecX vec(std::initializer_list<double> xs) {
  VecX v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;
  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back((ok ? "" : "FAILED ") + what);
  }
};

std::vector<Geometry> builtin_geometries() {
  return {Geometry(sphere2(1.3)), Geometry(pseudosphere2(0.8)), Geometry(torus2(2.5, 1.0)), Geometry(sphere3(1.1)),
          Geometry(flat(2)), Geometry(flat(3))};
}

// ---------------------------------------------------------------------------

Outcome curvature_constants() {
  Outcome out;
  std::mt19937_64 rng(101);
  for (double R : {0.7, 1.0, 2.5}) {
    const Geometry s(sphere2(R)), h(pseudosphere2(R));
    double ws = 0, wh = 0;
    for (int k = 0; k < 100; ++k) {
      const double want = 2 / (R * R);
      ws = std::max(ws, std::abs(s.scalar_curvature(poisson::sample_state(s, rng).head(2)) - want) / want);
      wh = std::max(wh, std::abs(h.scalar_curvature(poisson::sample_state(h, rng).head(2)) + want) / want);
    }
    out.require(ws < kCurvatureRel, fmt::format("sphere2 R={} rel err {:.2e}", R, ws));
    out.require(wh < kCurvatureRel, fmt::format("pseudosphere2 R={} rel err {:.2e}", R, wh));
  }
  return out;
}

Outcome metric_compatibility() {
  Outcome out;
  std::mt19937_64 rng(102);
  for (const auto& g : builtin_geometries()) {
    double worst = 0;
    for (int k = 0; k < 100; ++k)
      worst = std::max(worst, metric_compatibility_residual(g, poisson::sample_state(g, rng).head(g.dim())));
    out.require(worst < kCompatibility, fmt::format("{} {:.2e}", g.chart().name(), worst));
  }
  return out;
}

Outcome poisson_tables() {
  Outcome out;
  std::vector<std::pair<std::string, Geometry>> gs;
  for (const auto& g : builtin_geometries()) gs.emplace_back(g.chart().name(), g);
  gs.emplace_back("torsion", poisson::torsion_test_geometry());
  unsigned seed = 103;
  auto record = [&](const std::string& name, const poisson::BracketReport& rep) {
    double bracket = 0, jacobi = 0;
    bool rows_ok = true;
    for (const auto& row : rep.rows) {
      rows_ok = rows_ok && row.pass;
      const bool is_jacobi = row.name.find("Jacobi") != std::string::npos;
      (is_jacobi ? jacobi : bracket) = std::max(is_jacobi ? jacobi : bracket, row.max_error);
    }
    out.require(rows_ok && rep.pass() && !rep.rows.empty(),
                fmt::format("{}: {} rows, bracket {:.2e}, Jacobi {:.2e}", name, rep.rows.size(), bracket, jacobi));
  };
  for (const auto& [name, g] : gs) record(name, poisson::verify_tables(g, 200, seed++, kBracket, 50, kJacobi, threads()));
  record("su2", poisson::verify_su2_tables(1.3, 200, seed++, kBracket, 1.2, 0.4));
  return out;
}

Outcome geometric_power_vanishes() {
  Outcome out;
  {
    const Geometry g(sphere2(1.0));
    const BalanceSystem bs{g, builtin_frame(g.chart()),
                           BalanceBody{1.0, 0.25 * MatX::Identity(2, 2), ConstraintMode::Gyroscopic}, {}, {}, {}};
    BalanceState s{vec({1.0, 0.0}), vec({0.4, 0.9}), rotation2(0.3), 2.0 * (MatX(2, 2) << 0, -1, 1, 0).finished()};
    double worst = 0, curv = 0;
    for (int k = 0; k < 5000; ++k) {
      worst = std::max(worst, std::abs(geometric_power(bs, s)));
      curv = std::max(curv, balance_rhs(bs, s).F_curv.norm());
      s = balance_rk4_step(bs, s, 1e-3);
    }
    out.require(worst < kPower && curv > 0, fmt::format("sphere spin-curvature force {:.2e}", worst));
  }
  {
    const Geometry g = poisson::torsion_test_geometry();
    MatX J = MatX::Zero(3, 3);
    J.diagonal() << 0.3, 0.5, 0.7;
    const BalanceSystem bs{g, builtin_frame(g.chart()), BalanceBody{1.0, J, ConstraintMode::Gyroscopic}, {}, {}, {}};
    MatX w(3, 3);
    w << 0, -0.5, 0.2, 0.5, 0, -0.8, -0.2, 0.8, 0;
    BalanceState s{vec({0.1, 0.2, 0.3}), vec({0.3, -0.2, 0.4}), MatX::Identity(3, 3), w};
    double worst = 0, tors = 0, curv = 0;
    for (int k = 0; k < 2000; ++k) {
      const BalanceRates r = balance_rhs(bs, s);
      tors = std::max(tors, r.F_tors.norm());
      curv = std::max(curv, r.F_curv.norm());
      worst = std::max(worst, std::abs(geometric_power(bs, s)));
      s = balance_rk4_step(bs, s, 1e-3);
    }
    out.require(worst < kPower && tors > 0 && curv > 0,
                fmt::format("Riemann-Cartan torsion and curvature forces {:.2e}", worst));
  }
  return out;
}

Outcome conservation() {
  Outcome out;
  PotentialSpec osc;
  osc.kind = PotentialKind::SphereOscillator;
  osc.kappa = 1.0;
  PotentialSpec pkep;
  pkep.kind = PotentialKind::PseudoKepler;
  pkep.alpha = 1.0;
  struct Case {
    std::string name;
    ScenarioKind kind;
    PotentialSpec v;
    VecX q, qd;
  };
  // Initial data inside the regular part of each chart.
  const std::vector<Case> cases{
      {"sphere_gyro geodetic", ScenarioKind::SphereGyro, PotentialSpec{}, vec({0.8, 0.1, 0.2}), vec({0.2, 0.7, 0.4})},
      {"sphere_gyro oscillator", ScenarioKind::SphereGyro, osc, vec({0.5, 0.0, 0.0}), vec({0.05, 1.0, 0.3})},
      {"pseudosphere_gyro geodetic", ScenarioKind::PseudosphereGyro, PotentialSpec{}, vec({1.2, 0, 0}),
       vec({0.03, 0.2, 0.3})},
      {"pseudosphere_gyro kepler", ScenarioKind::PseudosphereGyro, pkep, vec({1.2, 0, 0}), vec({0.05, 0.4, 0.3})},
      {"torus_gyro geodetic", ScenarioKind::TorusGyro, PotentialSpec{}, vec({0.8, 0.1, 0.2}), vec({0.2, 0.7, 0.4})},
  };
  for (const auto& c : cases) {
    const Scenario s(c.kind, 1.2, 3.0, InertiaSpec{1.0, 0.5, {}});
    const HamiltonianSystem sys(s, c.v);
    const VecX p0 = legendre(s, c.q, c.qd);
    IntegratorOptions o;
    o.dt = sys.characteristic_time(sys.hamiltonian(c.q, p0)) / 1000;
    o.steps = 10000;
    o.output_every = 100;
    o.composition = 3;
    const Trajectory tr = integrate(sys, c.q, p0, o);
    out.require(!tr.stopped_at_singularity && tr.steps_taken == 10000 && tr.max_rel_energy_drift < kEnergy &&
                    tr.max_abs_cyclic_drift < kCyclic && tr.max_constraint_residual < kConstraint,
                fmt::format("{}: dE/E {:.2e}, cyclic {:.2e}, constraint {:.2e}", c.name, tr.max_rel_energy_drift,
                            tr.max_abs_cyclic_drift, tr.max_constraint_residual));
  }
  return out;
}

double energy_above_minimum(const aa::SeparableSpec& spec, const aa::CyclicConstants& c, double above) {
  return spec.radial_stage(c).minimum_level() + above - spec.radial_level({0.0, 0.0, 0.0});
}

Outcome residue_degeneracy() {
  Outcome out;
  const double I = 1.0;
  const Scenario sc(ScenarioKind::SphereGyro, 1.0, 0.0, InertiaSpec{1.0, I, {}});
  std::mt19937_64 rng(106);
  std::uniform_real_distribution<double> u(-2.0, 2.0), lift(0.2, 3.0);
  {
    const aa::SeparableSpec spec(sc, PotentialSpec{});
    int count[4] = {0, 0, 0, 0};
    double worst[4] = {0, 0, 0, 0};
    const std::string names[4] = {"i", "ii", "iii", "iv"};
    while (std::min({count[0], count[1], count[2], count[3]}) < 20) {
      const double ell = u(rng), s = u(rng);
      const std::string reg = aa::region_label(2 * kPi * ell, 2 * kPi * s);
      const int idx = reg == "i" ? 0 : reg == "ii" ? 1 : reg == "iii" ? 2 : reg == "iv" ? 3 : -1;
      if (idx < 0 || count[idx] >= 20) continue;
      ++count[idx];
      const double E = energy_above_minimum(spec, {ell, s, 0}, lift(rng));
      const VecX J = spec.actions({ell, s, 0}, {E, 0, 0});
      const double lhs = 4 * kPi * std::sqrt(2 * I * E);
      const double rhs = 2 * J(0) + std::abs(J(1) - J(2)) + std::abs(J(1) + J(2));
      worst[idx] = std::max(worst[idx], std::abs(lhs - rhs) / lhs);
    }
    for (int r = 0; r < 4; ++r)
      out.require(worst[r] < kResidue, fmt::format("region {}: 20 samples, rel err {:.2e}", names[r], worst[r]));
  }
  {
    const double ah = 0.3, bh = 0.2;
    PotentialSpec v;
    v.kind = PotentialKind::CosPolyCentrifugal;
    v.alpha_hat = ah;
    v.beta_hat = bh;
    const aa::SeparableSpec spec(sc, v);
    std::uniform_real_distribution<double> w(-1.5, 1.5);
    double worst = 0;
    for (int k = 0; k < 20; ++k) {
      const double ell = w(rng), s = w(rng);
      const double E = energy_above_minimum(spec, {ell, s, 0}, lift(rng));
      const VecX J = spec.actions({ell, s, 0}, {E, 0, 0});
      const double c = 8 * kPi * kPi * I;
      const double lhs = 4 * kPi * std::sqrt(2 * I * (E + ah));
      const double rhs = 2 * J(0) + std::sqrt(std::pow(J(1) - J(2), 2) + c * (ah + bh)) +
                         std::sqrt(std::pow(J(1) + J(2), 2) + c * (ah - bh));
      worst = std::max(worst, std::abs(lhs - rhs) / lhs);
    }
    out.require(worst < kResidue,
                fmt::format("(alpha cos^2 + beta cos)/sin^2 regauge, E -> E + alpha: rel err {:.2e}", worst));
  }
  return out;
}

Outcome bertrand() {
  Outcome out;
  const std::vector<std::pair<ChartKind, PotentialKind>> runs{
      {ChartKind::Sphere2, PotentialKind::SphereOscillator},
      {ChartKind::Sphere2, PotentialKind::SphereKepler},
      {ChartKind::Pseudosphere2, PotentialKind::PseudoOscillator},
      {ChartKind::Pseudosphere2, PotentialKind::PseudoKepler},
  };
  unsigned seed = 107;
  for (const auto& [chart, pot] : runs) {
    const aa::BertrandReport rep = aa::bertrand_closure(chart, pot, 50, seed++, 1.0, 1.0, threads());
    double worst = 0;
    for (const auto& s : rep.samples) worst = std::max(worst, s.distance);
    bool ok = rep.samples.size() == 50 && rep.closed == 50 && worst < kClosure;
    std::string extra;
    if (pot == PotentialKind::PseudoOscillator) {
      ok = ok && rep.threshold_ok && !rep.threshold_check.empty();
      extra = ", above threshold: " + rep.threshold_check;
    }
    out.require(ok, fmt::format("{} {}: {}/50 closed, max distance {:.2e}{}", rep.chart, rep.potential, rep.closed,
                                worst, extra));
  }
  const aa::BertrandReport ctl =
      aa::bertrand_closure(ChartKind::Sphere2, PotentialKind::ControlTanCubed, 50, seed++, 1.0, 1.0, threads());
  const double failed = 1.0 - ctl.closed / double(ctl.samples.size());
  out.require(failed >= kControlFailShare, fmt::format("control tan^3: {:.0f}% fail closure", 100 * failed));
  return out;
}

Outcome frequency_consistency() {
  Outcome out;
  PotentialSpec osc;
  osc.kind = PotentialKind::SphereOscillator;
  osc.kappa = 1.0;
  PotentialSpec pkep;
  pkep.kind = PotentialKind::PseudoKepler;
  pkep.alpha = 1.0;
  struct Chart {
    std::string name;
    Scenario scenario;
    PotentialSpec v;
  };
  const std::vector<Chart> charts{
      {"sphere2", Scenario(ScenarioKind::SphereGyro, 1.0, 0.0, InertiaSpec{1.0, 0.5, {}}), osc},
      {"pseudosphere2", Scenario(ScenarioKind::PseudosphereGyro, 1.0, 0.0, InertiaSpec{1.0, 0.5, {}}), pkep},
      {"torus2", Scenario(ScenarioKind::TorusGyro, 0.7, 2.0, InertiaSpec{1.0, 0.5, {}}), PotentialSpec{}},
  };
  std::mt19937_64 rng(108);
  std::uniform_real_distribution<double> u(-1.0, 1.0), frac(0.1, 0.9);
  for (const auto& ch : charts) {
    const aa::SeparableSpec spec(ch.scenario, ch.v);
    const HamiltonianSystem sys(ch.scenario, ch.v);
    int done = 0, attempts = 0;
    double worst = 0;
    while (done < 10 && attempts < 200) {
      ++attempts;
      const aa::CyclicConstants c{u(rng), 0.5 * u(rng), 0};
      try {
        const aa::Stage st = spec.radial_stage(c);
        const double lo = st.minimum_level();
        // Bound librating levels: below the separatrix on the torus, below the escape level on the pseudosphere.
        double hi = lo + 1.5;
        if (ch.name == "torus2") hi = st.separatrix_level();
        const double C = lo + frac(rng) * (hi - lo);
        const double E = C - spec.radial_level({0.0, 0.0, 0.0});
        const aa::StageConstants k{E, 0, 0};
        const VecX J = spec.actions(c, k);
        const VecX nu = aa::frequencies(spec, J, 1e-5, aa::Branch::Libration);
        const double omega_r = 2 * kPi * nu(0);
        const auto [q0, p0] = spec.state_on_torus(c, k);
        const aa::RadialOrbit orb = aa::integrate_radial_period(sys, q0, p0, 2 * kPi / omega_r);
        worst = std::max(worst, std::abs(orb.period * omega_r / (2 * kPi) - 1.0));
        ++done;
      } catch (const Error&) {
        continue;
      }
    }
    out.require(done == 10 && worst < kPeriod, fmt::format("{}: {} spectra, rel err {:.2e}", ch.name, done, worst));
  }
  return out;
}

Outcome su2_flow() {
  Outcome out;
  const su2::BodyParams bp{1.0, 0.6, 1.3};
  {
    const su2::MomentumPair s0{Vec3(0.4, -0.3, 0.8), Vec3(-0.2, 0.5, 0.1)};
    const su2::FlowResult res = su2::momentum_flow(s0, bp, 1e-3, 100000, 0);
    const double worst = std::max({res.max_rel_drift_S_norm, res.max_rel_drift_Srl_norm, res.max_rel_drift_conserved});
    out.require(worst < kFlowDrift, fmt::format("1e5 steps: |S| {:.2e}, |S_rl| {:.2e}, conserved vector {:.2e}",
                                                res.max_rel_drift_S_norm, res.max_rel_drift_Srl_norm,
                                                res.max_rel_drift_conserved));
  }
  {
    const Scenario s(ScenarioKind::S3Gyro, bp.R, 0.0, InertiaSpec{bp.m, bp.I, {}});
    const HamiltonianSystem sys(s, PotentialSpec{});
    const VecX q0 = vec({0.2, -0.1, 0.3, 0.4, 0.2, -0.5});
    const VecX p0 = legendre(s, q0, vec({0.05, 0.1, -0.05, 0.3, -0.2, 0.2}));
    IntegratorOptions o;
    o.dt = 1e-3;
    o.steps = 5000;
    o.output_every = 100;
    o.composition = 3;
    const Trajectory tr = integrate(sys, q0, p0, o);
    const su2::FlowResult flow = su2::momentum_flow(s3_momenta(s, q0, p0), bp, o.dt, o.steps, o.output_every);
    double worst = 0, scale = 0;
    bool aligned = tr.t.size() == flow.samples.size() && !tr.stopped_at_singularity;
    for (std::size_t k = 0; aligned && k < tr.t.size(); ++k) {
      const su2::MomentumPair m = s3_momenta(s, tr.q[k], tr.p[k]);
      const su2::MomentumPair& f = flow.samples[k].s;
      scale = std::max(scale, std::max(m.S.norm(), m.Srl.norm()));
      worst = std::max(worst, std::max((m.S - f.S).norm(), (m.Srl - f.Srl).norm()));
    }
    out.require(aligned && worst < kFlowMatch * std::max(1.0, scale),
                fmt::format("reduced flow vs projected canonical trajectory over t = {}: {:.2e}", o.dt * o.steps, worst));
  }
  return out;
}

std::pair<VecX, VecX> random_state(const Scenario& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = s.dim();
  VecX q(n), qd(n);
  for (int i = 0; i < n; ++i) {
    q(i) = u(rng);
    qd(i) = u(rng);
  }
  switch (s.kind()) {
    case ScenarioKind::SphereGyro:
    case ScenarioKind::SphereAffineXY:
    case ScenarioKind::SphereAffinePolar:
      q(0) = s.R() * (kPi / 2 + 1.1 * u(rng));
      break;
    case ScenarioKind::PseudosphereGyro:
    case ScenarioKind::PseudosphereGyroLorentz:
    case ScenarioKind::PseudosphereAffine:
      q(0) = 1.2 + u(rng);
      break;
    case ScenarioKind::S3Gyro:
      q.head(3) *= 0.6;
      q.tail(3) *= 1.5;
      break;
    default:
      q(0) *= kPi;
  }
  if (s.kind() == ScenarioKind::SphereAffinePolar) {
    q(4) = 1.0 + 0.5 * u(rng);
    q(5) = 0.4 + 0.3 * u(rng);
  } else if (s.is_affine()) {
    q(4) = 0.35 + 0.15 * u(rng);
    q(5) = 1.1 + 0.3 * u(rng);
  }
  return {q, qd};
}

Outcome dual_path() {
  Outcome out;
  const std::vector<ScenarioKind> kinds{
      ScenarioKind::SphereGyro,       ScenarioKind::SphereAffineXY,          ScenarioKind::SphereAffinePolar,
      ScenarioKind::PseudosphereGyro, ScenarioKind::PseudosphereGyroLorentz, ScenarioKind::PseudosphereAffine,
      ScenarioKind::TorusGyro,        ScenarioKind::TorusAffine,             ScenarioKind::S3Gyro};
  std::mt19937_64 rng(110);
  for (ScenarioKind kind : kinds) {
    const Scenario s(kind, kind == ScenarioKind::S3Gyro ? 1.5 : 1.2, 3.0, InertiaSpec{1.3, 0.4, {}});
    double worst = 0;
    for (int t = 0; t < 1000; ++t) {
      const auto [q, qd] = random_state(s, rng);
      const double T = kinetic_energy(s, q, qd);
      const double scale = std::max(1.0, std::abs(T));
      const BodyKinematics b = s.body_kinematics(q, qd);
      worst = std::max(worst, std::abs(comoving_kinetic(b, s.inertia().m, s.internal_inertia(), s.frame(),
                                                        s.geometry()) - T) / scale);
      if (s.is_affine()) {
        const MatX wE = body_drift(b, s.frame(), s.geometry());
        const double trans = 0.5 * s.inertia().m * b.v.dot(s.geometry().metric(b.x) * b.v);
        const auto tp = s.two_polar_kinematics(q, qd);
        if (!tp) {
          worst = INFINITY;
          continue;
        }
        worst = std::max(worst, std::abs(trans + two_polar_internal_kinetic(*tp, wE, s.inertia().I) - T) / scale);
      }
    }
    out.require(worst < kDualPath, fmt::format("{}: 1000 states, rel err {:.2e}", to_string(kind), worst));
  }
  return out;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    std::string name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "curvature constants of sphere and pseudosphere", curvature_constants},
      {2, "metric compatibility of the Levi-Civita connections", metric_compatibility},
      {3, "Poisson bracket tables and Jacobi identity", poisson_tables},
      {4, "geometric forces do no work", geometric_power_vanishes},
      {5, "conservation under implicit midpoint", conservation},
      {6, "residue degeneracy of the spherical gyroscope", residue_degeneracy},
      {7, "Bertrand closure and the control potential", bertrand},
      {8, "action-angle frequency against the measured radial period", frequency_consistency},
      {9, "SU(2) momentum flow", su2_flow},
      {10, "dual-path kinetic energy", dual_path},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << fmt::format("criterion {:2d}: {}  {} ({:.1f} s)\n", c.id, o.pass ? "PASS" : "FAIL", c.name, secs);
    for (const auto& n : o.notes) std::cout << "    " << n << "\n";
    std::cout.flush();
    if (!o.pass) ++failures;
  }
  std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
