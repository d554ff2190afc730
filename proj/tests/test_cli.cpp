#include "curvedbody/cli.hpp"

#include "doctest.h"

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace cb;
using namespace cb::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = CURVEDBODY_SOURCE_DIR;

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("curvedbody_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<Diagnostic> diagnostics_of(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.diagnostics();
  }
  return {};
}

bool mentions(const std::vector<Diagnostic>& ds, const std::string& needle) {
  for (const auto& d : ds)
    if (d.format().find(needle) != std::string::npos) return true;
  return false;
}

int run_tool(const std::string& args) {
  const std::string cmd = std::string(CURVEDBODY_TOOL) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::vector<double>> parse_csv(const std::string& text, std::string* header) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, *header);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

const char* kMinimal = R"(
[manifold]
name = sphere2

[initial]
r = 1.0
p_phi = 0.5
)";

}  // namespace

TEST_CASE("expression evaluator") {
  CHECK(evaluate_expression("pi/3") == doctest::Approx(M_PI / 3).epsilon(1e-15));
  CHECK(evaluate_expression("2^3 - 1") == 7.0);
  CHECK(evaluate_expression("-(1 + 2) * 4") == -12.0);
  CHECK(evaluate_expression("sqrt(2)*cos(0)") == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(evaluate_expression("1e-3") == 1e-3);
  int column = -1;
  CHECK_THROWS_AS(evaluate_expression("1 + * 2", &column), Error);
  CHECK(column == 4);
  CHECK_THROWS_AS(evaluate_expression("sin(1", &column), Error);
}

TEST_CASE("minimal config and its defaults") {
  const ScenarioSpec s = parse_config_text(kMinimal);
  CHECK(s.kind() == ScenarioKind::SphereGyro);
  CHECK(s.manifold.R == 1.0);
  CHECK(s.body.m == 1.0);
  CHECK(s.body.I == 1.0);
  CHECK(s.potential.kind == PotentialKind::Zero);
  CHECK(s.integrator.options.method == Method::ImplicitMidpoint);
  CHECK(s.integrator.dt_from_default);
  CHECK(s.outputs.wants("csv"));
  CHECK(s.outputs.wants("json"));
  CHECK(s.outputs.wants("text"));
  REQUIRE(s.initial.q.size() == 3);
  CHECK(s.initial.q(0) == 1.0);
  CHECK(s.initial.p(1) == 0.5);
  CHECK(s.initial.p(2) == 0.0);
}

TEST_CASE("velocities go through the Legendre map") {
  const ScenarioSpec s = parse_config_text(R"(
[manifold]
name = sphere2
[body]
I = 0.5
[initial]
r = 1.0
r_dot = 0.3
phi_dot = 0.2
)");
  CHECK(s.initial.from_velocity);
  const VecX qd = (VecX(3) << 0.3, 0.2, 0.0).finished();
  CHECK((s.initial.p - legendre(s.scenario(), s.initial.q, qd)).norm() < 1e-14);
}

TEST_CASE("validation diagnostics") {
  auto ds = diagnostics_of(R"(
[manifold]
name = torus2
R = 2
L = 1
)");
  CHECK(mentions(ds, "L must exceed R"));

  ds = diagnostics_of(R"(
[manifold]
name = sphere2
[potential]
kind = quartic
)");
  CHECK(mentions(ds, "allowed:"));
  CHECK(mentions(ds, "sphere_oscillator"));

  ds = diagnostics_of(R"(
[manifold]
name = sphere2
R = -1
[integrator]
composition = 2
steps = 1.5
)");
  CHECK(ds.size() >= 2);
  CHECK(mentions(ds, "composition must be 1 or 3"));
  CHECK(mentions(ds, "must be an integer"));
  for (const auto& d : ds) CHECK(d.kind == ErrorKind::ValidationError);

  try {
    parse_config_text("[manifold]\nname = sphere2\n[body\n");
    FAIL("expected a parse error");
  } catch (const ConfigError& e) {
    CHECK(e.kind() == ErrorKind::ParseError);
    REQUIRE(!e.diagnostics().empty());
    CHECK(e.diagnostics().front().line == 3);
    CHECK(e.diagnostics().front().column > 0);
  }
  ds = diagnostics_of("[manifold]\nname = sphere2\n  r = 1\n");
  REQUIRE(!ds.empty());
  CHECK(ds.front().line == 3);
  CHECK(ds.front().column == 3);
  CHECK(mentions(diagnostics_of("[manifold]\nname = sphere2\n[initial]\nr = (1 +\n"), "4:"));
  CHECK(mentions(diagnostics_of("[colours]\nred = 1\n"), "unknown section"));
}

TEST_CASE("config round trip keeps explicit keys") {
  const ScenarioSpec a = parse_config(kSource / "configs" / "sphere_gyro.cfg");
  const std::string written = write_config(a);
  const ScenarioSpec b = parse_config_text(written);
  CHECK(write_config(b) == written);
  CHECK(b.kind() == a.kind());
  CHECK(b.potential.kind == a.potential.kind);
  CHECK(b.potential.kappa == a.potential.kappa);
  CHECK(b.body.I == a.body.I);
  CHECK(b.integrator.options.dt == a.integrator.options.dt);
  CHECK(b.integrator.options.steps == a.integrator.options.steps);
  CHECK((b.initial.q - a.initial.q).norm() == 0.0);
  CHECK((b.initial.p - a.initial.p).norm() == 0.0);
  CHECK(b.tolerances.energy == a.tolerances.energy);
  for (const auto& e : a.entries) CHECK(written.find(e.key + " = ") != std::string::npos);
  CHECK(written.find("newton_tol") == std::string::npos);
}

TEST_CASE("simulate writes deterministic reports") {
  const ScenarioSpec spec = parse_config(kSource / "configs" / "sphere_gyro.cfg");
  RunOptions o1, o2;
  o1.out_dir = scratch_dir("det1").string();
  o2.out_dir = scratch_dir("det2").string();
  const RunResult r1 = run_simulate(spec, o1), r2 = run_simulate(spec, o2);
  CHECK(r1.exit_code == ExitCode::Ok);
  CHECK(r1.report["status"] == "pass");
  CHECK(r1.files.size() == 3);
  CHECK(slurp(fs::path(*o1.out_dir) / "report.json") == slurp(fs::path(*o2.out_dir) / "report.json"));
  CHECK(slurp(fs::path(*o1.out_dir) / "trajectory.csv") == slurp(fs::path(*o2.out_dir) / "trajectory.csv"));
  CHECK(r1.report["seed"] == 20240607);

  const std::string text = slurp(fs::path(*o1.out_dir) / "report.txt");
  CHECK(text.find("conservation") != std::string::npos);
  CHECK(text.find("status: pass") != std::string::npos);

  const std::string csv = slurp(fs::path(*o1.out_dir) / "trajectory.csv");
  CHECK(csv.find('\r') == std::string::npos);
  std::string header;
  const auto rows = parse_csv(csv, &header);
  CHECK(header == "t,r,phi,psi,p_r,p_phi,p_psi,E");
  REQUIRE(rows.size() == 101);
  for (const auto& row : rows) {
    REQUIRE(row.size() == 8);
    CHECK(row[5] == rows.front()[5]);
    CHECK(row[6] == rows.front()[6]);
    CHECK(std::abs(row[7] - rows.front()[7]) < 1e-8 * rows.front()[7]);
  }
}

TEST_CASE("tolerance breach is reported") {
  ScenarioSpec spec = parse_config(kSource / "configs" / "sphere_gyro.cfg");
  spec.tolerances.energy = 1e-18;
  RunOptions o;
  o.out_dir = scratch_dir("breach").string();
  const RunResult r = run_simulate(spec, o);
  CHECK(r.exit_code == ExitCode::ToleranceBreach);
  CHECK(r.report["status"] == "fail");
  CHECK(r.text.find("fail") != std::string::npos);
}

TEST_CASE("json numbers carry 17 significant digits") {
  Json j = {{"x", 0.1}, {"n", 3}};
  const std::string s = dump_json(j, -1);
  CHECK(s.find("0.10000000000000001") != std::string::npos);
  CHECK(s.find("\"n\":3") != std::string::npos);
  CHECK(Json::parse(s)["x"].get<double>() == 0.1);
}

TEST_CASE("actions command") {
  const ScenarioSpec spec = parse_config(kSource / "configs" / "sphere_geodetic.cfg");
  RunOptions o;
  o.out_dir = scratch_dir("actions").string();
  const RunResult r = run_actions(spec, o);
  CHECK(r.exit_code == ExitCode::Ok);
  CHECK(r.report["degeneracy"] == 2);
  CHECK(r.text.find("J_r") != std::string::npos);
}

TEST_CASE("exit codes") {
  CHECK(exit_code_for(ErrorKind::ParseError) == ExitCode::ParseFailure);
  CHECK(exit_code_for(ErrorKind::ValidationError) == ExitCode::ValidationFailure);
  CHECK(exit_code_for(ErrorKind::StepIntoSingularity) == ExitCode::RuntimeFailure);

  const fs::path dir = scratch_dir("exit");
  write_file(dir / "bad_syntax.cfg", "[manifold\nname = sphere2\n");
  write_file(dir / "bad_value.cfg", "[manifold]\nname = torus2\nR = 2\nL = 1\n");
  CHECK(run_tool("simulate --config " + (dir / "bad_syntax.cfg").string()) == 2);
  CHECK(run_tool("simulate --config " + (dir / "bad_value.cfg").string()) == 3);
  CHECK(run_tool("simulate --no-such-flag") == 2);
  CHECK(run_tool("verify --suite geometry --chart sphere2 --samples 5 --out " + (dir / "v").string()) == 0);
}

TEST_CASE("trajectories match the stored golden files") {
  for (const std::string name : {"sphere_gyro", "torus_gyro", "pseudosphere_gyro", "sphere_affine_elastic", "s3_gyro"}) {
    INFO(name);
    const ScenarioSpec spec = parse_config(kSource / "configs" / (name + ".cfg"));
    RunOptions o;
    o.out_dir = scratch_dir("golden_" + name).string();
    const RunResult r = run_simulate(spec, o);
    CHECK(r.exit_code == ExitCode::Ok);
    std::string h_new, h_old;
    const auto fresh = parse_csv(slurp(fs::path(*o.out_dir) / "trajectory.csv"), &h_new);
    const auto gold = parse_csv(slurp(kSource / "tests" / "golden" / (name + ".csv")), &h_old);
    CHECK(h_new == h_old);
    REQUIRE(fresh.size() == gold.size());
    double worst = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      REQUIRE(fresh[i].size() == gold[i].size());
      for (std::size_t j = 0; j < gold[i].size(); ++j)
        worst = std::max(worst, std::abs(fresh[i][j] - gold[i][j]) / std::max(1.0, std::abs(gold[i][j])));
    }
    CHECK(worst < 1e-9);
  }
}
