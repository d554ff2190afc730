#include "curvedbody/action_angle.hpp"

#include "curvedbody/parallel.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

namespace cb::action_angle {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

double safe(double v) { return std::isfinite(v) ? v : -kInf; }

// Sample points of a search interval: uniform interior points plus geometric
// clustering towards open endpoints, where turning points may crowd a singularity.
std::vector<double> scan_grid(const SearchInterval& in, std::initializer_list<std::optional<double>> extras) {
  const double span = in.hi - in.lo;
  std::vector<double> g;
  constexpr int kUniform = 2000;
  if (in.periodic) {
    for (int k = 0; k < kUniform; ++k) g.push_back(in.lo + span * k / kUniform);
  } else {
    for (int k = 0; k < kUniform; ++k) g.push_back(in.lo + span * (k + 0.5) / kUniform);
    constexpr int kLog = 1200;
    for (int k = 0; k < kLog; ++k) {
      const double t = std::pow(10.0, -12.0 + 12.0 * k / kLog);
      g.push_back(in.lo + span * t);
      g.push_back(in.hi - span * t);
    }
  }
  for (const auto& extra : extras)
    if (extra && *extra > in.lo && *extra < in.hi) g.push_back(*extra);
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

double refine_root(const Integrand& f, double neg, double pos) {
  auto fn = [&](double u) { return safe(f(u)); };
  boost::math::tools::eps_tolerance<double> tol(40);
  auto r = boost::math::tools::bisect(fn, std::min(neg, pos), std::max(neg, pos), tol);
  // The classical side of the bracket keeps the integrand non-negative at the endpoint.
  return neg < pos ? r.second : r.first;
}

double wrap(double u, const SearchInterval& in) {
  const double span = in.hi - in.lo;
  return in.lo + std::fmod(std::fmod(u - in.lo, span) + span, span);
}

}  // namespace

TurningPoints turning_points(const Integrand& f, const SearchInterval& in, std::optional<double> hint) {
  if (!(in.hi > in.lo)) throw Error(ErrorKind::BadParams, "empty search interval");
  std::optional<double> h = hint;
  if (h && in.periodic) h = wrap(*h, in);
  std::vector<double> u = scan_grid(in, {h});
  int N = static_cast<int>(u.size());
  std::vector<double> v(N);
  for (int k = 0; k < N; ++k) v[k] = safe(f(u[k]));

  if (in.periodic && *std::min_element(v.begin(), v.end()) > 0) {
    // The grid may straddle a narrow forbidden gap near a separatrix; refine the slowest point.
    const int k = static_cast<int>(std::min_element(v.begin(), v.end()) - v.begin());
    const double du = (in.hi - in.lo) / 1000.0;
    const auto r = boost::math::tools::brent_find_minima([&](double x) { return safe(f(x)); }, u[k] - du, u[k] + du, 52);
    const double seam = wrap(r.first, in);
    if (r.second > 0) return {seam, seam + (in.hi - in.lo), true};
    u = scan_grid(in, {h, seam});
    N = static_cast<int>(u.size());
    v.assign(N, 0.0);
    for (int j = 0; j < N; ++j) v[j] = safe(f(u[j]));
  }

  if (in.periodic) {
    int start = -1;
    for (int k = 0; k < N; ++k)
      if (v[k] <= 0) {
        start = k;
        break;
      }
    const double span = in.hi - in.lo;
    // Unroll the circle so that it begins at a forbidden point.
    std::vector<double> uu(N + 1), vv(N + 1);
    for (int k = 0; k <= N; ++k) {
      const int idx = (start + k) % N;
      uu[k] = u[idx] + (start + k >= N ? span : 0.0);
      vv[k] = v[idx];
    }
    int best_a = -1, best_b = -1;
    double best_score = -kInf;
    for (int k = 1; k <= N; ++k) {
      if (vv[k] > 0 && vv[k - 1] <= 0) {
        int e = k;
        while (e + 1 <= N && vv[e + 1] > 0) ++e;
        double score = *std::max_element(vv.begin() + k, vv.begin() + e + 1);
        if (h) {
          bool inside = false;
          for (int j = k; j <= e; ++j)
            if (std::abs(wrap(uu[j], in) - *h) < 1e-15 * std::max(1.0, span)) inside = true;
          score = inside ? kInf : score;
        }
        if (score > best_score) {
          best_score = score;
          best_a = k;
          best_b = e;
        }
        k = e;
      }
    }
    if (best_a < 0) throw Error(ErrorKind::NoClassicalRegion, "integrand is non-positive on the whole circle");
    TurningPoints tp;
    tp.lo = refine_root(f, uu[best_a - 1], uu[best_a]);
    tp.hi = refine_root(f, uu[best_b + 1], uu[best_b]);
    return tp;
  }

  int best_a = -1, best_b = -1;
  double best_score = -kInf;
  for (int k = 0; k < N; ++k) {
    if (v[k] > 0) {
      int e = k;
      while (e + 1 < N && v[e + 1] > 0) ++e;
      double score = *std::max_element(v.begin() + k, v.begin() + e + 1);
      if (h && *h >= u[k] && *h <= u[e]) score = kInf;
      if (score > best_score) {
        best_score = score;
        best_a = k;
        best_b = e;
      }
      k = e;
    }
  }
  if (best_a < 0) throw Error(ErrorKind::NoClassicalRegion, "integrand is non-positive on the search interval");
  if (best_a == 0 || best_b == N - 1)
    throw Error(ErrorKind::UnboundedMotion, "classical region reaches the boundary of the search interval");
  TurningPoints tp;
  tp.lo = refine_root(f, u[best_a - 1], u[best_a]);
  tp.hi = refine_root(f, u[best_b + 1], u[best_b]);
  return tp;
}

double action_integral(const Integrand& f, const TurningPoints& tp) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  double err = 0, l1 = 0;
  double J = 0;
  if (tp.rotating) {
    // Double-exponential clustering at the seam resolves the near-separatrix dip.
    auto g = [&](double u) { return std::sqrt(std::max(0.0, f(u))); };
    boost::math::quadrature::tanh_sinh<double> ts;
    J = ts.integrate(g, tp.lo, tp.hi, 1e-13, &err, &l1);
  } else {
    if (!(tp.hi > tp.lo)) return 0.0;
    const double mid = 0.5 * (tp.hi + tp.lo), half = 0.5 * (tp.hi - tp.lo);
    // u = mid + half·sin θ turns the √ endpoint behaviour into a smooth integrand.
    auto g = [&](double th) {
      const double u = mid + half * std::sin(th);
      return std::sqrt(std::max(0.0, f(u))) * half * std::cos(th);
    };
    J = 2 * GK::integrate(g, -kPi / 2, kPi / 2, 30, 1e-12, &err, &l1);
  }
  if (!std::isfinite(J) || !(err <= 1e-9 * std::max(1.0, std::abs(l1))))
    throw Error(ErrorKind::QuadratureFailure, "action quadrature did not converge");
  return J;
}

// ---------------------------------------------------------------------------

Integrand Stage::at(double C) const {
  return [a = a, b = b, C](double u) { return a(u) * C - b(u); };
}

double Stage::minimum_level(double* where) const {
  const std::vector<double> u = scan_grid(interval, {});
  auto level = [&](double x) {
    const double v = b(x) / a(x);
    return std::isfinite(v) ? v : kInf;
  };
  int k_min = 0;
  double v_min = kInf;
  for (int k = 0; k < static_cast<int>(u.size()); ++k) {
    const double v = level(u[k]);
    if (v < v_min) {
      v_min = v;
      k_min = k;
    }
  }
  if (!std::isfinite(v_min)) throw Error(ErrorKind::NoClassicalRegion, name + ": no finite effective potential");
  const int N = static_cast<int>(u.size());
  double lo, hi;
  if (interval.periodic) {
    const double du = (interval.hi - interval.lo) / N;
    lo = u[k_min] - du;
    hi = u[k_min] + du;
  } else {
    lo = u[std::max(0, k_min - 1)];
    hi = u[std::min(N - 1, k_min + 1)];
  }
  double x = u[k_min];
  if (hi > lo) {
    const auto r = boost::math::tools::brent_find_minima(level, lo, hi, 52);
    if (r.second <= v_min) {
      x = r.first;
      v_min = r.second;
    }
  }
  if (where) *where = interval.periodic ? wrap(x, interval) : x;
  return v_min;
}

double Stage::separatrix_level() const {
  if (!interval.periodic) return kInf;
  const std::vector<double> u = scan_grid(interval, {});
  auto neg_level = [&](double x) { return -b(x) / a(x); };
  int k_max = 0;
  double v_max = -kInf;
  for (int k = 0; k < static_cast<int>(u.size()); ++k) {
    const double v = -neg_level(u[k]);
    if (v > v_max) {
      v_max = v;
      k_max = k;
    }
  }
  const double du = (interval.hi - interval.lo) / static_cast<double>(u.size());
  const auto r = boost::math::tools::brent_find_minima(neg_level, u[k_max] - du, u[k_max] + du, 52);
  return std::max(v_max, -r.second);
}

double Stage::action(double C) const {
  double where = 0;
  const double c_min = minimum_level(&where);
  if (C <= c_min) {
    if (C < c_min - 1e-12 * std::max(1.0, std::abs(c_min)))
      throw Error(ErrorKind::NoClassicalRegion, name + ": level below the effective-potential minimum");
    return 0.0;
  }
  const Integrand f = at(C);
  return action_integral(f, turning_points(f, interval, where));
}

bool Stage::rotating(double C) const {
  if (!interval.periodic) return false;
  double where = 0;
  if (C <= minimum_level(&where)) return false;
  return turning_points(at(C), interval, where).rotating;
}

double Stage::level_for_action(double J, Branch branch) const {
  double where = 0;
  const double c_min = minimum_level(&where);
  if (J < 0) throw Error(ErrorKind::BracketFailure, name + ": negative action");
  if (J == 0 && branch != Branch::Rotation) return c_min;
  const double scale = std::max(1.0, std::abs(c_min));
  auto g = [&](double C) { return action(C) - J; };
  boost::math::tools::eps_tolerance<double> tol(46);
  std::uintmax_t iters = 200;

  double lo = c_min, hi;
  if (interval.periodic) {
    const double c_sep = separatrix_level();
    const double below = c_sep - 1e-7 * std::max(1.0, std::abs(c_sep));
    if (branch != Branch::Rotation && below > c_min && action(below) > J) {
      const auto r = boost::math::tools::toms748_solve(g, c_min, below, -J, action(below) - J, tol, iters);
      return 0.5 * (r.first + r.second);
    }
    if (branch == Branch::Libration)
      throw Error(ErrorKind::BracketFailure, name + ": action exceeds the librating branch");
    lo = c_sep + 1e-7 * std::max(1.0, std::abs(c_sep));
    if (action(lo) > J)
      throw Error(ErrorKind::BracketFailure, name + ": action lies in the gap between libration and rotation");
  }
  double step = 0.25 * scale;
  hi = lo + step;
  double g_hi = 0;
  for (int k = 0;; ++k) {
    try {
      g_hi = g(hi);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::UnboundedMotion)
        throw Error(ErrorKind::BracketFailure, name + ": target action exceeds the bounded regime");
      throw;
    }
    if (g_hi > 0) break;
    if (k > 200) throw Error(ErrorKind::BracketFailure, name + ": could not bracket the target action");
    lo = hi;
    step *= 2;
    hi = lo + step;
  }
  const double g_lo = g(lo);
  const auto r = boost::math::tools::toms748_solve(g, lo, hi, g_lo, g_hi, tol, iters);
  return 0.5 * (r.first + r.second);
}

// ---------------------------------------------------------------------------

std::string region_label(double J_phi, double J_psi) {
  if (J_phi > std::abs(J_psi)) return "i";
  if (std::abs(J_phi) < J_psi) return "ii";
  if (std::abs(J_phi) < -J_psi) return "iii";
  if (J_phi < -std::abs(J_psi)) return "iv";
  return "boundary";
}

namespace {

struct ResidueTerms {
  double minus, plus;
};

ResidueTerms residue_terms(double J_phi, double J_psi, double I, double alpha_hat, double beta_hat) {
  const double c = 8 * kPi * kPi * I;
  const double dm = (J_phi - J_psi) * (J_phi - J_psi) + c * (alpha_hat + beta_hat);
  const double dp = (J_phi + J_psi) * (J_phi + J_psi) + c * (alpha_hat - beta_hat);
  if (dm < 0 || dp < 0) throw Error(ErrorKind::OutOfRegime, "negative discriminant in the residue formula");
  return {std::sqrt(dm), std::sqrt(dp)};
}

}  // namespace

ClosedForm spherical_gyro_closed_form(double E, double J_phi, double J_psi, double I, double alpha_hat,
                                      double beta_hat) {
  if (!(I > 0)) throw Error(ErrorKind::BadParams, "I must be positive");
  const double shifted = E + alpha_hat;
  if (shifted < 0) throw Error(ErrorKind::OutOfRegime, "E + alpha_hat must be non-negative");
  const ResidueTerms r = residue_terms(J_phi, J_psi, I, alpha_hat, beta_hat);
  const double J = 0.5 * (4 * kPi * std::sqrt(2 * I * shifted) - r.minus - r.plus);
  if (J < 0) throw Error(ErrorKind::OutOfRegime, "energy below the bottom of the well");
  return {J, region_label(J_phi, J_psi)};
}

double spherical_gyro_closed_form_energy(double J_theta, double J_phi, double J_psi, double I, double alpha_hat,
                                         double beta_hat) {
  if (!(I > 0)) throw Error(ErrorKind::BadParams, "I must be positive");
  if (J_theta < 0) throw Error(ErrorKind::OutOfRegime, "J_theta must be non-negative");
  const ResidueTerms r = residue_terms(J_phi, J_psi, I, alpha_hat, beta_hat);
  const double root = (2 * J_theta + r.minus + r.plus) / (4 * kPi);
  return root * root / (2 * I) - alpha_hat;
}

// ---------------------------------------------------------------------------

namespace {

Chain chain_of(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::SphereGyro:
    case ScenarioKind::PseudosphereGyro:
    case ScenarioKind::PseudosphereGyroLorentz:
    case ScenarioKind::TorusGyro:
      return Chain::Gyro;
    case ScenarioKind::SphereAffineXY:
    case ScenarioKind::PseudosphereAffine:
    case ScenarioKind::TorusAffine:
      return Chain::AffineXY;
    case ScenarioKind::SphereAffinePolar:
      return Chain::AffinePolar;
    default:
      throw Error(ErrorKind::UnsupportedChart, std::string("no separation chain for scenario '") + to_string(k) + "'");
  }
}

constexpr double kFar = 1e4;

}  // namespace

SeparableSpec::SeparableSpec(Scenario scenario, PotentialSpec potential, bool allow_unbounded)
    : scenario_(std::move(scenario)), potential_(std::move(potential)), chain_(chain_of(scenario_.kind())) {
  prepare_potential(potential_);
  check_potential_compatible(potential_, scenario_);
  radial_ = potential_;
  switch (potential_.kind) {
    case PotentialKind::SeparableRXY:
      radial_.kind = potential_.radial;
      kx_ = potential_.kx;
      ky_ = potential_.ky;
      break;
    case PotentialKind::SeparablePolar:
      radial_.kind = potential_.radial;
      krho_ = potential_.krho;
      keps_ = potential_.keps;
      break;
    case PotentialKind::Canonical2DElastic:
      if (chain_ != Chain::AffinePolar)
        throw Error(ErrorKind::ValidationError, "canonical_2d_elastic separates only in (rho, eps) coordinates");
      radial_.kind = potential_.radial;
      krho_ = keps_ = potential_.kappa;
      break;
    default:
      break;
  }
  if (kx_ < 0 || ky_ < 0 || krho_ < 0 || keps_ < 0)
    throw Error(ErrorKind::ValidationError, "internal elastic constants must be non-negative");
  if (!allow_unbounded) {
    if (chain_ == Chain::AffineXY && (kx_ == 0 || ky_ == 0))
      throw Error(ErrorKind::ValidationError,
                  "deformative (x, y) motion is unbounded without elastic terms; pass allow_unbounded");
    if (chain_ == Chain::AffinePolar && krho_ == 0)
      throw Error(ErrorKind::ValidationError,
                  "deformative rho motion is unbounded without an elastic term; pass allow_unbounded");
  }
}

std::vector<std::string> SeparableSpec::action_names() const {
  const std::string r = scenario_.coordinate_names()[0];
  switch (chain_) {
    case Chain::Gyro:
      return {"J_" + r, "J_phi", "J_psi"};
    case Chain::AffineXY:
      return {"J_" + r, "J_phi", "J_alpha", "J_beta", "J_x", "J_y"};
    case Chain::AffinePolar:
      return {"J_" + r, "J_phi", "J_alpha", "J_beta", "J_rho", "J_eps"};
  }
  return {};
}

Stage SeparableSpec::radial_stage(const CyclicConstants& c) const {
  const Scenario& s = scenario_;
  const double m = s.inertia().m, I = s.inertia().I;
  const double g = s.base_radial_metric();
  const double sigma = s.signature() == Signature::LorentzType ? -1.0 : 1.0;
  const double spin_term = chain_ == Chain::Gyro ? sigma * m * c.s * c.s / I : 0.0;
  const PotentialSpec V = radial_;
  Stage st;
  st.name = "J_" + s.coordinate_names()[0];
  st.a = [m, g](double) { return 2 * m * g; };
  st.b = [scn = scenario_, V, m, g, c, spin_term](double u) {
    const double w = scn.width(u);
    const double d = c.ell - scn.drift_coefficient(u) * c.s;
    return g * (2 * m * radial_potential(V, scn, u) + d * d / (w * w) + spin_term);
  };
  const double R = s.R();
  switch (s.kind()) {
    case ScenarioKind::TorusGyro:
    case ScenarioKind::TorusAffine:
      st.interval = {-kPi, kPi, true};
      break;
    case ScenarioKind::PseudosphereGyro:
    case ScenarioKind::PseudosphereGyroLorentz:
    case ScenarioKind::PseudosphereAffine:
      st.interval = {0.0, 40.0 * R, false};
      break;
    default: {
      const bool hemisphere = V.kind == PotentialKind::SphereOscillator || V.kind == PotentialKind::ControlTanCubed;
      st.interval = {0.0, hemisphere ? 0.5 * kPi * R : kPi * R, false};
    }
  }
  if (V.kind == PotentialKind::CustomTabulated && V.table) {
    st.interval.lo = std::max(st.interval.lo, V.table->lower());
    st.interval.hi = std::min(st.interval.hi, V.table->upper());
    st.interval.periodic = false;
  }
  return st;
}

Stage SeparableSpec::x_stage(double p_gamma) const {
  const double I = scenario_.inertia().I, k = kx_;
  return {"J_x", [I](double) { return 2 * I; },
          [I, k, p_gamma](double x) { return I * k * x * x + p_gamma * p_gamma / (x * x); },
          {0.0, kFar, false}};
}

Stage SeparableSpec::y_stage(double p_delta) const {
  const double I = scenario_.inertia().I, k = ky_;
  return {"J_y", [I](double) { return 2 * I; },
          [I, k, p_delta](double y) { return I * k * y * y + p_delta * p_delta / (y * y); },
          {0.0, kFar, false}};
}

Stage SeparableSpec::eps_stage(double p_gamma, double p_delta) const {
  const double I = scenario_.inertia().I, k = keps_;
  return {"J_eps", [I](double) { return 2 * I; },
          [I, k, p_gamma, p_delta](double e) {
            const double sn = std::sin(e), cs = std::cos(e);
            return 4 * I * k / std::cos(2 * e) + p_gamma * p_gamma / (sn * sn) + p_delta * p_delta / (cs * cs);
          },
          {0.0, k > 0 ? kPi / 4 : kPi / 2, false}};
}

Stage SeparableSpec::rho_stage(double A) const {
  const double I = scenario_.inertia().I, k = krho_;
  return {"J_rho", [I](double) { return 2 * I; },
          [I, k, A](double r) { return I * k * r * r + 2 * I * A / (r * r); }, {0.0, kFar, false}};
}

double SeparableSpec::radial_level(const StageConstants& k) const {
  switch (chain_) {
    case Chain::Gyro:
      return k.E;
    case Chain::AffineXY:
      return k.E - k.c1 - k.c2;
    case Chain::AffinePolar:
      return k.E - k.c2;
  }
  return k.E;
}

std::pair<CyclicConstants, StageConstants> SeparableSpec::constants(const VecX& q, const VecX& p) const {
  scenario_.check(q);
  CyclicConstants c;
  StageConstants k;
  k.E = hamiltonian(scenario_, q, p, potential_);
  c.ell = p(1);
  const double I = scenario_.inertia().I;
  if (chain_ == Chain::Gyro) {
    c.s = p(2);
    return {c, k};
  }
  const double pg = p(2), pd = p(3);
  c.s = pg + pd;
  c.j = pg - pd;
  if (chain_ == Chain::AffineXY) {
    const double x = q(4), y = q(5);
    k.c1 = p(4) * p(4) / (2 * I) + pg * pg / (2 * I * x * x) + 0.5 * kx_ * x * x;
    k.c2 = p(5) * p(5) / (2 * I) + pd * pd / (2 * I * y * y) + 0.5 * ky_ * y * y;
  } else {
    const double rho = q(4), e = q(5);
    const double sn = std::sin(e), cs = std::cos(e);
    k.c1 = p(5) * p(5) / (2 * I) + pg * pg / (2 * I * sn * sn) + pd * pd / (2 * I * cs * cs) +
           2 * keps_ / std::cos(2 * e);
    k.c2 = p(4) * p(4) / (2 * I) + k.c1 / (rho * rho) + 0.5 * krho_ * rho * rho;
  }
  return {c, k};
}

VecX SeparableSpec::actions(const CyclicConstants& c, const StageConstants& k) const {
  const double tp = 2 * kPi;
  const double Jr = radial_stage(c).action(radial_level(k));
  switch (chain_) {
    case Chain::Gyro: {
      VecX J(3);
      J << Jr, tp * c.ell, tp * c.s;
      return J;
    }
    case Chain::AffineXY: {
      VecX J(6);
      J << Jr, tp * c.ell, tp * c.s, tp * c.j, x_stage(c.p_gamma()).action(k.c1), y_stage(c.p_delta()).action(k.c2);
      return J;
    }
    case Chain::AffinePolar: {
      VecX J(6);
      J << Jr, tp * c.ell, tp * c.s, tp * c.j, rho_stage(k.c1).action(k.c2),
          eps_stage(c.p_gamma(), c.p_delta()).action(k.c1);
      return J;
    }
  }
  return {};
}

CyclicConstants SeparableSpec::cyclic_from_actions(const VecX& J) const {
  const std::size_t n = action_names().size();
  if (static_cast<std::size_t>(J.size()) != n) throw Error(ErrorKind::DimensionMismatch, "wrong number of actions");
  CyclicConstants c;
  c.ell = J(1) / (2 * kPi);
  c.s = J(2) / (2 * kPi);
  if (chain_ != Chain::Gyro) c.j = J(3) / (2 * kPi);
  return c;
}

ActionSpectrum SeparableSpec::spectrum(const VecX& q, const VecX& p) const {
  const auto [c, k] = constants(q, p);
  const Branch b = radial_stage(c).rotating(radial_level(k)) ? Branch::Rotation : Branch::Libration;
  return {action_names(), actions(c, k), c, k, k.E, b};
}

ActionSpectrum SeparableSpec::invert_energy(const VecX& J, Branch radial) const {
  const CyclicConstants c = cyclic_from_actions(J);
  StageConstants k;
  double Er = 0;
  switch (chain_) {
    case Chain::Gyro:
      Er = radial_stage(c).level_for_action(J(0), radial);
      k.E = Er;
      break;
    case Chain::AffineXY:
      k.c1 = x_stage(c.p_gamma()).level_for_action(J(4));
      k.c2 = y_stage(c.p_delta()).level_for_action(J(5));
      Er = radial_stage(c).level_for_action(J(0), radial);
      k.E = Er + k.c1 + k.c2;
      break;
    case Chain::AffinePolar:
      k.c1 = eps_stage(c.p_gamma(), c.p_delta()).level_for_action(J(5));
      k.c2 = rho_stage(k.c1).level_for_action(J(4));
      Er = radial_stage(c).level_for_action(J(0), radial);
      k.E = Er + k.c2;
      break;
  }
  const Branch b = radial_stage(c).rotating(Er) ? Branch::Rotation : Branch::Libration;
  return {action_names(), J, c, k, k.E, b};
}

namespace {

// Start of a stage orbit: inner (or outer) turning point when librating, deepest point when rotating.
std::pair<double, double> stage_start(const Stage& st, double C, bool outer = false) {
  double where = 0;
  const double c_min = st.minimum_level(&where);
  if (C <= c_min) return {where, 0.0};
  const Integrand f = st.at(C);
  const TurningPoints tp = turning_points(f, st.interval, where);
  if (tp.rotating) return {where, std::sqrt(std::max(0.0, f(where)))};
  return {outer ? tp.hi : tp.lo, 0.0};
}

}  // namespace

std::pair<VecX, VecX> SeparableSpec::state_on_torus(const CyclicConstants& c, const StageConstants& k) const {
  const int n = scenario_.dim();
  VecX q = VecX::Zero(n), p = VecX::Zero(n);
  const auto [u, pu] = stage_start(radial_stage(c), radial_level(k));
  q(0) = u;
  p(0) = pu;
  p(1) = c.ell;
  if (chain_ == Chain::Gyro) {
    p(2) = c.s;
    return {q, p};
  }
  p(2) = c.p_gamma();
  p(3) = c.p_delta();
  if (chain_ == Chain::AffineXY) {
    std::tie(q(4), p(4)) = stage_start(x_stage(c.p_gamma()), k.c1);
    // The chart needs |x| < y, so y starts at its outer turning point.
    std::tie(q(5), p(5)) = stage_start(y_stage(c.p_delta()), k.c2, true);
    if (q(4) >= q(5)) throw Error(ErrorKind::OutOfRegime, "torus does not reach the chart region |x| < y");
  } else {
    std::tie(q(4), p(4)) = stage_start(rho_stage(k.c1), k.c2);
    std::tie(q(5), p(5)) = stage_start(eps_stage(c.p_gamma(), c.p_delta()), k.c1);
  }
  return {q, p};
}

// ---------------------------------------------------------------------------

namespace {

std::vector<int> librating_indices(Chain chain) {
  if (chain == Chain::Gyro) return {0};
  return {0, 4, 5};
}

}  // namespace

VecX frequencies(const SeparableSpec& spec, const VecX& J, double relative_step, Branch radial) {
  if (radial == Branch::Auto) radial = spec.invert_energy(J).radial_branch;
  const int d = static_cast<int>(J.size());
  const double scale = std::max(1e-3, J.cwiseAbs().maxCoeff());
  const auto lib = librating_indices(spec.chain());
  VecX nu(d);
  for (int i = 0; i < d; ++i) {
    const double h = relative_step * std::max(std::abs(J(i)), scale);
    VecX a = J, b = J;
    const bool one_sided = std::find(lib.begin(), lib.end(), i) != lib.end() && J(i) - h < 0;
    if (one_sided) {
      VecX c = J;
      a(i) += h;
      c(i) += 2 * h;
      nu(i) = (-3 * spec.energy(J, radial) + 4 * spec.energy(a, radial) - spec.energy(c, radial)) / (2 * h);
    } else {
      a(i) += h;
      b(i) -= h;
      nu(i) = (spec.energy(a, radial) - spec.energy(b, radial)) / (2 * h);
    }
  }
  return nu;
}

namespace {

double relation_residual(const std::vector<int>& n, const VecX& nu) {
  double dot = 0, l1 = 0;
  for (int i = 0; i < nu.size(); ++i) {
    dot += n[i] * nu(i);
    l1 += std::abs(n[i]);
  }
  const double scale = nu.cwiseAbs().maxCoeff();
  if (scale == 0) return 0;
  return std::abs(dot) / (l1 * scale);
}

int gcd_all(const std::vector<int>& n) {
  int g = 0;
  for (int v : n) g = std::gcd(g, std::abs(v));
  return g;
}

}  // namespace

DegeneracyReport frequencies_and_degeneracy(const SeparableSpec& spec, const VecX& J, int n_max, double tol,
                                            Branch radial) {
  if (radial == Branch::Auto) radial = spec.invert_energy(J).radial_branch;
  DegeneracyReport rep;
  rep.names = spec.action_names();
  rep.nu = frequencies(spec, J, 1e-5, radial);
  rep.omega = 2 * kPi * rep.nu;
  const int d = static_cast<int>(J.size());

  std::vector<std::vector<int>> candidates;
  std::vector<int> n(d, -n_max);
  const long total = static_cast<long>(std::pow(2 * n_max + 1, d));
  for (long idx = 0; idx < total; ++idx) {
    long r = idx;
    bool zero = true;
    int first = 0;
    for (int i = 0; i < d; ++i) {
      n[i] = static_cast<int>(r % (2 * n_max + 1)) - n_max;
      r /= 2 * n_max + 1;
      if (n[i] != 0 && zero) {
        first = n[i];
        zero = false;
      }
    }
    if (zero || first < 0 || gcd_all(n) != 1) continue;
    if (relation_residual(n, rep.nu) < tol) candidates.push_back(n);
  }
  auto l1 = [](const std::vector<int>& v) {
    int s = 0;
    for (int x : v) s += std::abs(x);
    return s;
  };
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](const auto& a, const auto& b) { return l1(a) < l1(b); });

  // Confirmation point for separating structural from accidental relations.
  std::optional<VecX> nu_perturbed;
  const double scale = std::max(1e-3, J.cwiseAbs().maxCoeff());
  for (double amp : {2e-2, 5e-3}) {
    VecX Jp = J;
    for (int i = 0; i < d; ++i) Jp(i) += amp * scale * std::sin(1.7 * i + 0.9);
    try {
      nu_perturbed = frequencies(spec, Jp, 1e-5, radial);
      break;
    } catch (const Error&) {
    }
  }

  MatX basis(0, d), structural(0, d);
  for (const auto& c : candidates) {
    MatX trial(basis.rows() + 1, d);
    trial.topRows(basis.rows()) = basis;
    for (int i = 0; i < d; ++i) trial(basis.rows(), i) = c[i];
    Eigen::FullPivLU<MatX> lu(trial);
    if (lu.rank() <= basis.rows()) continue;
    basis = trial;
    IntegerRelation rel{c, relation_residual(c, rep.nu), false};
    if (nu_perturbed) rel.accidental = relation_residual(c, *nu_perturbed) >= tol;
    if (!rel.accidental) {
      MatX s(structural.rows() + 1, d);
      s.topRows(structural.rows()) = structural;
      s.row(structural.rows()) = trial.row(basis.rows() - 1);
      structural = s;
    }
    rep.relations.push_back(rel);
    if (basis.rows() == d) break;
  }
  rep.degeneracy = structural.rows() == 0 ? 0 : static_cast<int>(Eigen::FullPivLU<MatX>(structural).rank());
  return rep;
}

// ---------------------------------------------------------------------------

RadialOrbit integrate_radial_period(const HamiltonianSystem& sys, const VecX& q0, const VecX& p0,
                                    double period_guess, int steps_per_period) {
  if (!(period_guess > 0) || steps_per_period < 100) throw Error(ErrorKind::BadParams, "bad period guess");
  const int n = sys.dim();
  IntegratorOptions opt;
  opt.method = Method::RK4;
  const double dt = period_guess / steps_per_period;
  VecX z(2 * n);
  z << q0, p0;
  const double E0 = sys.hamiltonian(q0, p0);

  const long max_steps = 5L * steps_per_period;
  double t = 0, loop = 0;
  bool passed_outer = false;
  auto power = [&](const VecX& y) { return y(n) * sys.rhs(y)(0); };
  double prev_power = power(z);
  for (long k = 0; k < max_steps; ++k) {
    const VecX next = step(sys, z, dt, opt);
    const double a = z(n), b = next(n);
    if (!passed_outer && a > 0 && b <= 0) passed_outer = true;
    if (passed_outer && a < 0 && b >= 0) {
      auto pr_at = [&](double tau) { return step(sys, z, tau, opt)(n); };
      boost::math::tools::eps_tolerance<double> tol(50);
      std::uintmax_t iters = 100;
      const auto r = boost::math::tools::toms748_solve(pr_at, 0.0, dt, a, b, tol, iters);
      const double tau = 0.5 * (r.first + r.second);
      const VecX fin = step(sys, z, tau, opt);
      const double pw = power(fin);
      loop += 0.5 * tau * (prev_power + pw);
      RadialOrbit out;
      out.period = t + tau;
      out.delta_q = fin.head(n) - q0;
      out.loop_action = loop;
      out.rel_energy_drift = std::abs(sys.hamiltonian(fin.head(n), fin.tail(n)) - E0) / std::max(1e-300, std::abs(E0));
      return out;
    }
    const double pw = power(next);
    loop += 0.5 * dt * (prev_power + pw);
    prev_power = pw;
    z = next;
    t += dt;
  }
  throw Error(ErrorKind::UnboundedMotion, "radial period not completed within five period estimates");
}

// ---------------------------------------------------------------------------

std::pair<int, int> nearest_rational(double x, int q_max, double* distance) {
  int bp = 0, bq = 1;
  double best = kInf;
  for (int q = 1; q <= q_max; ++q) {
    const int p = static_cast<int>(std::lround(x * q));
    const double d = std::abs(x - static_cast<double>(p) / q);
    if (d < best - 1e-15) {
      best = d;
      bp = p;
      bq = q;
    }
  }
  if (distance) *distance = best;
  return {bp, bq};
}

bool BertrandReport::pass() const {
  if (!threshold_ok) return false;
  if (bertrand) return closed == static_cast<int>(samples.size());
  return samples.size() - closed >= 0.8 * samples.size();
}

BertrandReport bertrand_closure(ChartKind chart, PotentialKind kind, int samples, unsigned seed, double R,
                                double strength, int threads) {
  if (chart != ChartKind::Sphere2 && chart != ChartKind::Pseudosphere2)
    throw Error(ErrorKind::UnsupportedChart, "orbit closure is tested on sphere2 and pseudosphere2");
  const bool sphere = chart == ChartKind::Sphere2;
  PotentialSpec V;
  BertrandReport rep;
  rep.chart = sphere ? "sphere2" : "pseudosphere2";
  double bound = kInf;
  switch (kind) {
    case PotentialKind::SphereOscillator:
    case PotentialKind::PseudoOscillator:
      V.kind = sphere ? PotentialKind::SphereOscillator : PotentialKind::PseudoOscillator;
      V.kappa = strength;
      if (!sphere) bound = 0.5 * strength * R * R;
      break;
    case PotentialKind::SphereKepler:
    case PotentialKind::PseudoKepler:
      V.kind = sphere ? PotentialKind::SphereKepler : PotentialKind::PseudoKepler;
      V.alpha = strength;
      if (!sphere) bound = -strength / R;
      break;
    case PotentialKind::ControlTanCubed:
      if (!sphere) throw Error(ErrorKind::UnsupportedChart, "the control potential is defined on sphere2");
      V.kind = kind;
      V.kappa = strength;
      rep.bertrand = false;
      break;
    default:
      throw Error(ErrorKind::ValidationError, "orbit closure needs an oscillator, Kepler or control potential");
  }
  rep.potential = to_string(V.kind);
  const Scenario scn(sphere ? ScenarioKind::SphereGyro : ScenarioKind::PseudosphereGyro, R, 0.0, InertiaSpec{1.0, 1.0, {}});
  const SeparableSpec spec(scn, V);
  const HamiltonianSystem sys(scn, V);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  struct Draw {
    double ell, E;
  };
  std::vector<Draw> draws;
  for (int attempt = 0; static_cast<int>(draws.size()) < samples; ++attempt) {
    if (attempt > 100 * samples) throw Error(ErrorKind::NoClassicalRegion, "no bound orbits for these parameters");
    const double ell = std::sqrt(strength) * R * (0.1 + 0.7 * uni(rng));
    const Stage st = spec.radial_stage({ell, 0.0, 0.0});
    const double e_min = st.minimum_level();
    if (!(e_min < bound)) continue;
    const double span = std::isfinite(bound) ? bound - e_min : 2.0 * std::max(1.0, std::abs(e_min));
    draws.push_back({ell, e_min + span * (0.05 + 0.85 * uni(rng))});
  }
  rep.samples.resize(samples);
  parallel_for(samples, threads, [&](int k) {
    BertrandSample& out = rep.samples[k];
    out.E = draws[k].E;
    out.ell = draws[k].ell;
    try {
      const CyclicConstants c{out.ell, 0.0, 0.0};
      const Stage st = spec.radial_stage(c);
      const double h = 1e-5 * std::max(1.0, std::abs(out.E));
      const double period = (st.action(out.E + h) - st.action(out.E - h)) / (2 * h);
      const auto [q0, p0] = spec.state_on_torus(c, {out.E, 0, 0});
      const RadialOrbit orb = integrate_radial_period(sys, q0, p0, period);
      out.ratio = orb.delta_q(1) / (2 * kPi);
      std::tie(out.p, out.q) = nearest_rational(out.ratio, 4, &out.distance);
      out.closed = out.distance < 1e-6;
    } catch (const Error&) {
      out.closed = false;
      out.distance = kInf;
    }
  });
  for (const auto& s : rep.samples) rep.closed += s.closed ? 1 : 0;

  if (std::isfinite(bound)) {
    const double E = bound + 0.2 * std::max(1.0, std::abs(bound));
    const double ell = 0.3 * std::sqrt(strength) * R;
    try {
      spec.radial_stage({ell, 0.0, 0.0}).action(E);
      rep.threshold_ok = false;
      rep.threshold_check = "no error above the bound-orbit threshold";
    } catch (const Error& e) {
      rep.threshold_ok = e.kind() == ErrorKind::UnboundedMotion;
      rep.threshold_check = e.what();
    }
  }
  return rep;
}

}  // namespace cb::action_angle
