#pragma once

#include "curvedbody/action_angle.hpp"
#include "curvedbody/dynamics.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cb::cli {

using Json = nlohmann::ordered_json;

enum ExitCode : int {
  Ok = 0,
  ParseFailure = 2,
  ValidationFailure = 3,
  RuntimeFailure = 4,
  ToleranceBreach = 5,
};

/// One problem found while reading a configuration. Line and column are 1-based; 0 means unknown.
struct Diagnostic {
  ErrorKind kind = ErrorKind::ParseError;
  int line = 0;
  int column = 0;
  std::string field;
  std::string message;

  std::string format() const;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<Diagnostic> diagnostics);
  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

/// A key = value line exactly as written, used for the config round trip.
struct ConfigEntry {
  std::string section, key, value;
  int line = 0;
};

struct ManifoldSection {
  std::string name = "sphere2";
  double R = 1.0;
  double L = 0.0;
};

struct BodySection {
  std::string mode = "gyroscopic";       // gyroscopic | affine
  std::string coordinates = "xy";        // affine sphere bodies: xy | polar
  std::string signature = "riemannian";  // pseudosphere gyroscopes: riemannian | lorentz
  double m = 1.0;
  double I = 1.0;
  std::vector<double> J;                 // optional diagonal of J^AB
};

struct InitialSection {
  VecX q, p;
  bool from_velocity = false;  // p was computed from qdot through the Legendre map
};

struct IntegratorSection {
  IntegratorOptions options;
  bool dt_from_default = true;  // dt = T_char/1000 at the initial energy
  bool projection = false;
};

struct ToleranceSection {
  std::optional<double> energy, cyclic, constraint, closed_form;
};

struct ActionsSection {
  int n_max = 8;
  double tolerance = 1e-4;
  action_angle::Branch branch = action_angle::Branch::Auto;
};

struct OutputsSection {
  std::string directory = "runs";
  std::vector<std::string> formats = {"csv", "json", "text"};
  bool wants(const std::string& format) const;
};

struct ScenarioSpec {
  std::string source;
  ManifoldSection manifold;
  BodySection body;
  PotentialSpec potential;
  InitialSection initial;
  IntegratorSection integrator;
  ToleranceSection tolerances;
  ActionsSection actions;
  OutputsSection outputs;
  std::vector<ConfigEntry> entries;

  ScenarioKind kind() const;
  Scenario scenario() const;
  HamiltonianSystem system() const;
};

/// Evaluates a numeric literal with +, −, *, /, ^, parentheses, pi and sqrt/sin/cos/tan.
/// Throws ParseError carrying the 0-based offset of the offending character in `column`.
double evaluate_expression(const std::string& text, int* column = nullptr);

ScenarioSpec parse_config_text(const std::string& text, const std::string& source = "<memory>");
ScenarioSpec parse_config(const std::filesystem::path& path);
/// Writes back every explicitly set key in canonical section order.
std::string write_config(const ScenarioSpec& spec);

/// Flags shared by all commands.
struct RunOptions {
  std::optional<std::string> out_dir;
  unsigned seed = 20240607;
  int threads = 1;
  bool allow_unbounded = false;
  std::string suite;   // verify: geometry | poisson | su2 | all
  std::string chart;   // verify / bertrand chart filter
  std::string potential;
  int samples = 0;     // 0 selects the per-command default
};

struct RunResult {
  int exit_code = ExitCode::Ok;
  Json report;
  std::string text;
  std::vector<std::filesystem::path> files;
};

RunResult run_simulate(const ScenarioSpec& spec, const RunOptions& options);
RunResult run_actions(const ScenarioSpec& spec, const RunOptions& options);
RunResult run_verify(const std::optional<ScenarioSpec>& spec, const RunOptions& options);
RunResult run_bertrand(const std::optional<ScenarioSpec>& spec, const RunOptions& options);

/// JSON with fixed key order and every floating-point value at 17 significant digits.
std::string dump_json(const Json& j, int indent = 2);
/// Trajectory CSV: header t,<q names>,p_<q names>,E with LF line endings.
std::string trajectory_csv(const Scenario& scenario, const Trajectory& trajectory);

/// Writes bytes verbatim; throws IoError.
void write_file(const std::filesystem::path& path, const std::string& content);

/// Level from CURVEDBODY_LOG (error, warn, info, debug); warn when unset.
void configure_logging();

/// Maps an error from any module to the process exit code.
int exit_code_for(ErrorKind kind);

}  // namespace cb::cli
